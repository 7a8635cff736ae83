"""Seeded synthetic corpus: random cameras and lights around primitive scenes."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from ..core import CameraIntrinsics, ScalarGrid
from ..exceptions import DegenerateError, DomainError, SceneError
from .formats import camera_to_dict, write_camera, write_grid, write_ppm

log = logging.getLogger(__name__)

COVERAGE_REASON = "mask coverage below threshold"
RETRY_REASON = "no renderable camera within the retry budget"


@dataclass(frozen=True)
class DatasetSpec:
    """Randomization ranges for the synthetic corpus.

    ``scenes`` holds templates, each a list of primitive dicts in the scene
    file format. Camera distance and light distance are multiples of the
    template's bounding-box diagonal, measured from its center.
    """

    scenes: Tuple[tuple, ...] = ()
    samples_per_scene: int = 6
    width: int = 256
    height: int = 256
    fov_range: Tuple[float, float] = (25.0, 75.0)
    distance_range: Tuple[float, float] = (0.8, 1.6)
    elevation_range: Tuple[float, float] = (5.0, 60.0)
    roll_range: Tuple[float, float] = (-15.0, 15.0)
    light_count: Tuple[int, int] = (1, 3)
    light_intensity_range: Tuple[float, float] = (0.6, 1.2)
    light_elevation_range: Tuple[float, float] = (20.0, 80.0)
    light_distance_range: Tuple[float, float] = (2.0, 4.0)
    min_mask_coverage: float = 0.05
    max_retries: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(tuple(s) for s in self.scenes))
        if self.samples_per_scene < 1:
            raise DomainError("samples_per_scene must be >= 1")
        if not 0 < self.min_mask_coverage < 1:
            raise DomainError("min_mask_coverage must lie in (0, 1)")
        for name in ("fov_range", "distance_range", "elevation_range", "roll_range", "light_count",
                     "light_intensity_range", "light_elevation_range", "light_distance_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise DomainError(f"empty {name}")
        if self.fov_range[0] <= 0 or self.fov_range[1] >= 180:
            raise DomainError("fov range must lie inside (0, 180)")
        if self.elevation_range[1] >= 90:
            raise DomainError("elevation range must avoid the vertical")
        if self.elevation_range[0] <= 0:
            raise DomainError("camera elevation must be positive to see the ground contact")
        if self.distance_range[0] <= 0.5:
            raise DomainError("camera distance must keep the camera outside the scene bounds")
        if self.light_count[0] < 0 or self.max_retries < 0:
            raise DomainError("counts must be non-negative")

    def to_dict(self):
        d = asdict(self)
        d["scenes"] = [list(s) for s in self.scenes]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        scenes = []
        for s in d.pop("scenes", []):
            scenes.append(tuple(s["primitives"] if isinstance(s, dict) else s))
        tup = {k: tuple(v) for k, v in d.items() if isinstance(v, list)}
        d.update(tup)
        return cls(scenes=tuple(scenes), **d)


def filter_sample(mask, min_coverage):
    """Keep iff the mean of the binary mask is at least ``min_coverage``."""
    m = mask.values[0] if isinstance(mask, ScalarGrid) else np.asarray(mask)
    return bool(np.mean(m.astype(float)) >= min_coverage)


def split_tag(seed, scene, sample):
    """Seeded 8:1:1 train/val/test assignment."""
    h = int(hashlib.sha256(f"{seed}:{scene}:{sample}".encode()).hexdigest(), 16) % 10
    return "train" if h < 8 else ("val" if h == 8 else "test")


def _build(template):
    from ..raytracer.scene import _prim_from_dict

    try:
        return [_prim_from_dict(p) for p in template]
    except (KeyError, TypeError) as exc:
        raise SceneError(f"malformed scene template: {exc!r}") from None


def _spherical(center, dist, el_deg, az_deg):
    el, az = math.radians(el_deg), math.radians(az_deg)
    return tuple(float(v) for v in np.asarray(center) + dist * np.array([math.cos(el) * math.sin(az), -math.cos(el) * math.cos(az), math.sin(el)]))


def draw_scene(spec: DatasetSpec, prims, rng):
    """One random camera and light rig around ``prims``."""
    from ..raytracer import PointLight, Scene, SceneCamera

    lo, hi = np.min([p.bounds[0] for p in prims], axis=0), np.max([p.bounds[1] for p in prims], axis=0)
    center = (lo + hi) / 2
    diag = float(np.linalg.norm(hi - lo))
    pos = _spherical(center, rng.uniform(*spec.distance_range) * diag, rng.uniform(*spec.elevation_range), rng.uniform(0, 360))
    intr = CameraIntrinsics(float(rng.uniform(*spec.fov_range)), spec.width, spec.height)
    cam = SceneCamera(pos, tuple(float(c) for c in center), intr, float(rng.uniform(*spec.roll_range)))
    lights = []
    for _ in range(int(rng.integers(spec.light_count[0], spec.light_count[1] + 1))):
        dist = rng.uniform(*spec.light_distance_range) * diag
        where = _spherical(center, dist, rng.uniform(*spec.light_elevation_range), rng.uniform(0, 360))
        # intensity is the irradiance at the scene center
        lights.append(PointLight(where, float(rng.uniform(*spec.light_intensity_range) * dist * dist)))
    return Scene(prims, cam, lights)


def write_render_bundle(out_dir, result):
    """rgb.ppm, the seven split ORGF grids and camera.json. Returns the file names."""
    os.makedirs(out_dir, exist_ok=True)
    ph, pf = result.pixel_height, result.perspective
    grids = {
        "front_height": ph.front,
        "back_height": ph.back,
        "latitude": pf.latitude,
        "up_sin": ScalarGrid(pf.up.values[:1], ("up_sin",), pf.up.mask),
        "up_cos": ScalarGrid(pf.up.values[1:], ("up_cos",), pf.up.mask),
        "depth": result.depth,
        "mask": result.mask,
    }
    names = ["rgb.ppm"]
    write_ppm(os.path.join(out_dir, "rgb.ppm"), result.rgb)
    for name, grid in grids.items():
        write_grid(os.path.join(out_dir, f"{name}.orgf"), grid)
        names.append(f"{name}.orgf")
    write_camera(os.path.join(out_dir, "camera.json"), result.camera)
    names.append("camera.json")
    return names


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _sample(spec: DatasetSpec, out_dir, scene_idx, sample_idx):
    from ..raytracer import render_ground_truth

    rng = np.random.default_rng([spec.seed, scene_idx, sample_idx])
    prims = _build(spec.scenes[scene_idx])
    entry = {
        "scene": scene_idx,
        "sample": sample_idx,
        "split": split_tag(spec.seed, scene_idx, sample_idx),
    }
    result = None
    for attempt in range(spec.max_retries + 1):
        try:
            scene = draw_scene(spec, prims, rng)
            result = render_ground_truth(scene)
        except (SceneError, DegenerateError) as exc:
            log.debug("scene %d sample %d attempt %d: %s", scene_idx, sample_idx, attempt, exc)
            continue
        # every object pixel needs a defined pixel height
        if np.array_equal(result.pixel_height.front_valid, result.pixel_height.mask):
            break
        result = None
    entry["attempts"] = attempt + 1
    if result is None:
        entry.update(status="rejected", reason=RETRY_REASON)
        return entry
    coverage = float(np.mean(result.mask.values[0]))
    entry["coverage"] = coverage
    entry["camera"] = camera_to_dict(*result.camera)
    if not filter_sample(result.mask, spec.min_mask_coverage):
        entry.update(status="rejected", reason=COVERAGE_REASON)
        return entry
    name = f"scene{scene_idx:03d}_sample{sample_idx:02d}"
    sample_dir = os.path.join(out_dir, name)
    files = write_render_bundle(sample_dir, result)
    entry.update(
        status="kept",
        reason="",
        dir=name,
        digests={f: _digest(os.path.join(sample_dir, f)) for f in files},
    )
    return entry


def generate_dataset(spec: DatasetSpec, out_dir, workers=1):
    """Render every (scene, sample) pair, filter, and write ``manifest.json``.

    Each sample draws from its own seeded stream, so the corpus does not
    depend on ``workers``.
    """
    if not spec.scenes:
        raise DomainError("dataset spec has no scenes")
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(i, j) for i in range(len(spec.scenes)) for j in range(spec.samples_per_scene)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            entries = list(pool.map(lambda ij: _sample(spec, out_dir, *ij), jobs))
    else:
        entries = [_sample(spec, out_dir, i, j) for i, j in jobs]
    manifest = {
        "spec": spec.to_dict(),
        "entries": entries,
        "kept": sum(e["status"] == "kept" for e in entries),
        "rejected": sum(e["status"] == "rejected" for e in entries),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
