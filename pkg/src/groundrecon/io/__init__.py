"""File formats and the synthetic dataset generator."""
from .dataset import DatasetSpec, filter_sample, generate_dataset, split_tag, write_render_bundle
from .formats import (
    CAMERA_KEYS,
    GRID_FILES,
    camera_from_dict,
    camera_to_dict,
    field_from_grid,
    field_grid,
    grid_from_bytes,
    grid_header,
    grid_to_bytes,
    height_grid,
    heights_from_grid,
    load_grids,
    merge_grids,
    payload_size,
    read_camera,
    read_grid,
    read_pgm,
    read_bundle,
    read_ply,
    read_ppm,
    read_scene,
    write_camera,
    write_grid,
    write_pgm,
    write_ply,
    write_ppm,
    write_scene,
)
