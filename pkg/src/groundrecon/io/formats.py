"""File formats: ORGF float grids, ASCII PLY, PPM/PGM images, JSON camera and scene files."""
from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..core import CameraIntrinsics, CameraPose, PointCloud, ScalarGrid
from ..exceptions import DomainError, FormatError
from ..fields import HEIGHT_CHANNELS, LATITUDE_CHANNELS, UP_CHANNELS, PerspectiveField, PixelHeightMap

MAGIC = b"ORGF"
VERSION = 1
NAME_BYTES = 32
_FIXED = struct.Struct("<4sHHII")

# the split ground-truth grids of one rendered sample
GRID_FILES = ("front_height", "back_height", "latitude", "up_sin", "up_cos", "depth", "mask")


def grid_header(grid: ScalarGrid) -> bytes:
    C, H, W = grid.values.shape
    names = b""
    for name in grid.channels:
        raw = name.encode("ascii", errors="strict")
        if len(raw) > NAME_BYTES:
            raise DomainError(f"channel name {name!r} longer than {NAME_BYTES} bytes")
        names += raw.ljust(NAME_BYTES, b"\0")
    return _FIXED.pack(MAGIC, VERSION, C, W, H) + names


def payload_size(channels, width, height):
    return 4 * channels * width * height


def grid_to_bytes(grid: ScalarGrid) -> bytes:
    """Header plus little-endian float32 planes. The mask is not stored: readers
    rebuild it from non-finite values."""
    v = np.asarray(grid.values, dtype="<f4")
    return grid_header(grid) + np.ascontiguousarray(v).tobytes()


def grid_from_bytes(data: bytes) -> ScalarGrid:
    """Inverse of :func:`grid_to_bytes`. Grids containing nan get a mask of the
    pixels finite in every channel."""
    if len(data) < _FIXED.size:
        raise FormatError(f"truncated header: expected {_FIXED.size} bytes, found {len(data)}", len(data))
    magic, version, C, W, H = _FIXED.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}", 4)
    start = _FIXED.size + NAME_BYTES * C
    if len(data) < start:
        raise FormatError(f"truncated channel names: expected {start} header bytes, found {len(data)}", len(data))
    names = []
    for k in range(C):
        off = _FIXED.size + NAME_BYTES * k
        raw = data[off : off + NAME_BYTES].rstrip(b"\0")
        try:
            names.append(raw.decode("ascii"))
        except UnicodeDecodeError:
            raise FormatError("channel name is not ASCII", off) from None
    expected = payload_size(C, W, H)
    actual = len(data) - start
    if actual != expected:
        raise FormatError(f"payload length mismatch: expected {expected} bytes, found {actual}", start)
    v = np.frombuffer(data, dtype="<f4", offset=start).reshape(C, H, W).astype(np.float32)
    finite = np.isfinite(v).all(axis=0)
    return ScalarGrid(v, tuple(names), None if finite.all() else finite)


def write_grid(path, grid: ScalarGrid):
    with open(path, "wb") as fh:
        fh.write(grid_to_bytes(grid))


def read_grid(path) -> ScalarGrid:
    with open(path, "rb") as fh:
        return grid_from_bytes(fh.read())


def merge_grids(grids) -> ScalarGrid:
    """Stack grids channel-wise; the merged mask is the intersection."""
    grids = list(grids)
    if not grids:
        raise DomainError("nothing to merge")
    shape = grids[0].shape
    if any(g.shape != shape for g in grids):
        raise DomainError("grids differ in size")
    names = sum((g.channels for g in grids), ())
    if len(set(names)) != len(names):
        raise DomainError(f"duplicate channel names in {names}")
    masks = [g.mask for g in grids if g.mask is not None]
    mask = np.logical_and.reduce(masks) if masks else None
    return ScalarGrid(np.concatenate([g.values for g in grids]), names, mask)


def load_grids(paths) -> ScalarGrid:
    """Read one or more ORGF files (or directories of them) into one grid."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    files = []
    for p in paths:
        if os.path.isdir(p):
            files += [os.path.join(p, f"{n}.orgf") for n in GRID_FILES if os.path.exists(os.path.join(p, f"{n}.orgf"))]
        else:
            files.append(p)
    return merge_grids(read_grid(f) for f in files)


def _plane(grid, name):
    return np.asarray(grid.channel(name), dtype=float)


def heights_from_grid(grid: ScalarGrid, mask=None) -> PixelHeightMap:
    """Pixel-height map from ``front_height``/``back_height`` channels (plus ``mask``
    if present). The back height falls back to the front one when missing."""
    front = _plane(grid, HEIGHT_CHANNELS[0])
    back = _plane(grid, HEIGHT_CHANNELS[1]) if HEIGHT_CHANNELS[1] in grid.channels else front
    if mask is None:
        mask = _plane(grid, "mask") > 0.5 if "mask" in grid.channels else np.isfinite(front)
    return PixelHeightMap.from_arrays(front, back, mask)


def field_from_grid(grid: ScalarGrid) -> PerspectiveField:
    lat = _plane(grid, LATITUDE_CHANNELS[0])
    up = np.stack([_plane(grid, c) for c in UP_CHANNELS])
    ok = np.isfinite(lat) & np.isfinite(up).all(axis=0)
    return PerspectiveField(
        ScalarGrid(np.where(ok, lat, np.nan)[None], LATITUDE_CHANNELS, ok),
        ScalarGrid(np.where(ok, up, np.nan), UP_CHANNELS, ok),
    )


def height_grid(ph: PixelHeightMap) -> ScalarGrid:
    """Front, back and mask channels; heights are nan off the object."""
    front, back = ph.front.values[0], ph.back.values[0]
    return ScalarGrid(
        np.stack([front, back, ph.mask.astype(np.float32)]),
        HEIGHT_CHANNELS + ("mask",),
        np.isfinite(front) & np.isfinite(back),
    )


def field_grid(pf: PerspectiveField) -> ScalarGrid:
    return merge_grids([pf.latitude, pf.up])


# camera files

CAMERA_KEYS = ("fov_deg", "pitch_deg", "roll_deg", "width", "height", "principal_point")


def camera_to_dict(intr: CameraIntrinsics, pose: CameraPose):
    return {
        "fov_deg": float(intr.fov_deg),
        "pitch_deg": float(pose.pitch_deg),
        "roll_deg": float(pose.roll_deg),
        "width": int(intr.width),
        "height": int(intr.height),
        "principal_point": [float(c) for c in intr.principal_point],
    }


def camera_from_dict(d):
    missing = [k for k in CAMERA_KEYS[:5] if k not in d]
    if missing:
        raise FormatError(f"camera file is missing {', '.join(missing)}")
    intr = CameraIntrinsics(d["fov_deg"], int(d["width"]), int(d["height"]), d.get("principal_point"))
    return intr, CameraPose(d["pitch_deg"], d["roll_deg"])


def write_camera(path, camera):
    intr, pose = camera
    with open(path, "w") as fh:
        json.dump(camera_to_dict(intr, pose), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_camera(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"camera file is not valid JSON: {exc.msg}", exc.pos) from None
    return camera_from_dict(d)


def write_scene(path, scene):
    with open(path, "w") as fh:
        json.dump(scene.to_dict(), fh, indent=2)
        fh.write("\n")


def read_scene(path):
    from ..raytracer import Scene

    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"scene file is not valid JSON: {exc.msg}", exc.pos) from None
    return Scene.from_dict(d)


# point clouds


def write_ply(path, cloud: PointCloud):
    pts = np.asarray(cloud.points, dtype=float)
    if not np.all(np.isfinite(pts)):
        raise DomainError("cannot write non-finite points")
    colored = cloud.colors is not None
    header = ["ply", "format ascii 1.0", f"element vertex {len(pts)}"]
    header += [f"property float {a}" for a in "xyz"]
    if colored:
        header += [f"property uchar {c}" for c in ("red", "green", "blue")]
    header.append("end_header")
    # repr of a Python float round-trips exactly
    rows = [" ".join(repr(v) for v in p) for p in pts.tolist()]
    if colored:
        rows = [f"{r} {c[0]} {c[1]} {c[2]}" for r, c in zip(rows, cloud.colors.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(header) + "\n")
        for r in rows:
            fh.write(r + "\n")


def read_ply(path) -> PointCloud:
    """Reader for the ASCII vertex files written by :func:`write_ply`."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise FormatError("not a PLY file", 0)
    try:
        end = lines.index("end_header")
    except ValueError:
        raise FormatError("PLY header has no end_header") from None
    n, props = 0, []
    for line in lines[1:end]:
        parts = line.split()
        if parts[:2] == ["format", "binary_little_endian"] or parts[:2] == ["format", "binary_big_endian"]:
            raise FormatError("only ASCII PLY is supported")
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "property":
            props.append(parts[-1])
    rows = [l.split() for l in lines[end + 1 : end + 1 + n]]
    if len(rows) != n:
        raise FormatError(f"expected {n} vertices, found {len(rows)}")
    data = np.array(rows, dtype=float).reshape(n, len(props))
    pts = data[:, [props.index(a) for a in "xyz"]]
    colors = None
    if "red" in props:
        colors = data[:, [props.index(c) for c in ("red", "green", "blue")]].astype(np.uint8)
    return PointCloud(pts, colors=colors)


# images


def _to_bytes(img):
    a = np.asarray(img)
    if a.dtype != np.uint8:
        a = np.clip(np.round(np.nan_to_num(a.astype(float)) * 255.0), 0, 255).astype(np.uint8)
    return a


def write_ppm(path, rgb):
    """Binary P6 image from ``(3, H, W)`` floats in [0, 1] (or uint8), or a 3-channel grid."""
    if isinstance(rgb, ScalarGrid):
        rgb = rgb.values[:3]
    a = _to_bytes(rgb)
    if a.ndim != 3 or a.shape[0] != 3:
        raise DomainError("PPM needs a (3, H, W) image")
    _, H, W = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{W} {H}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a.transpose(1, 2, 0)).tobytes())


def write_pgm(path, gray):
    """Binary P5 image from ``(H, W)`` floats in [0, 1] (or uint8)."""
    if isinstance(gray, ScalarGrid):
        gray = gray.values[0]
    a = _to_bytes(gray)
    if a.ndim != 2:
        raise DomainError("PGM needs an (H, W) image")
    H, W = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a).tobytes())


def _read_netpbm(path, magic):
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos)
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated image header", pos)
        tokens.append(data[start:pos])
    if tokens[0] != magic:
        raise FormatError(f"bad magic {tokens[0]!r}, expected {magic!r}", 0)
    W, H, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError("only 8-bit images are supported", pos)
    pos += 1
    ch = 3 if magic == b"P6" else 1
    expected = W * H * ch
    if len(data) - pos != expected:
        raise FormatError(f"pixel data length mismatch: expected {expected} bytes, found {len(data) - pos}", pos)
    return np.frombuffer(data, dtype=np.uint8, offset=pos).reshape(H, W, ch)


def read_ppm(path) -> ScalarGrid:
    a = _read_netpbm(path, b"P6")
    return ScalarGrid(a.transpose(2, 0, 1).astype(np.float32) / 255.0, ("red", "green", "blue"))


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5")[..., 0]


def read_bundle(path):
    """Load a rendered sample directory: ``heights``, ``field``, ``depth``, ``mask``
    and, when present, ``camera`` and ``rgb``. Missing grids map to ``None``."""
    if not os.path.isdir(path):
        raise FormatError(f"{path} is not a sample directory")
    grids = {n: read_grid(os.path.join(path, f"{n}.orgf")) for n in GRID_FILES if os.path.exists(os.path.join(path, f"{n}.orgf"))}
    out = {"heights": None, "field": None, "depth": grids.get("depth"), "mask": None, "camera": None, "rgb": None}
    if "mask" in grids:
        out["mask"] = grids["mask"].values[0] > 0.5
    if "front_height" in grids:
        out["heights"] = heights_from_grid(merge_grids(grids[n] for n in ("front_height", "back_height", "mask") if n in grids))
    if all(n in grids for n in ("latitude", "up_sin", "up_cos")):
        out["field"] = field_from_grid(merge_grids(grids[n] for n in ("latitude", "up_sin", "up_cos")))
    if os.path.exists(os.path.join(path, "camera.json")):
        out["camera"] = read_camera(os.path.join(path, "camera.json"))
    if os.path.exists(os.path.join(path, "rgb.ppm")):
        out["rgb"] = read_ppm(os.path.join(path, "rgb.ppm"))
    return out
