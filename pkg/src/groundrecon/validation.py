"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np

from .core import CameraIntrinsics, CameraPose, PointCloud, ScalarGrid
from .exceptions import DomainError
from .fields import PerspectiveField, PixelHeightMap


def check_perspective_field(pf) -> PerspectiveField:
    if not isinstance(pf, PerspectiveField):
        raise DomainError(f"expected a PerspectiveField, got {type(pf).__name__}")
    if not pf.valid.any():
        raise DomainError("perspective field has no valid pixels")
    return pf


def check_pixel_heights(ph) -> PixelHeightMap:
    if not isinstance(ph, PixelHeightMap):
        raise DomainError(f"expected a PixelHeightMap, got {type(ph).__name__}")
    if not ph.mask.any():
        raise DomainError("pixel-height mask is empty")
    return ph


def check_camera(camera):
    """``(CameraIntrinsics, CameraPose)`` or ``None``."""
    if camera is None:
        return None
    try:
        intr, pose = camera
    except (TypeError, ValueError):
        raise DomainError("camera must be an (intrinsics, pose) pair") from None
    if not isinstance(intr, CameraIntrinsics) or not isinstance(pose, CameraPose):
        raise DomainError("camera must be an (intrinsics, pose) pair")
    return intr, pose


def check_same_shape(*items):
    shapes = {tuple(getattr(x, "shape", np.shape(x))[-2:]) for x in items if x is not None}
    if len(shapes) > 1:
        raise DomainError(f"inputs differ in size: {sorted(shapes)}")
    return shapes.pop() if shapes else None


def check_depth(d, name="depth") -> np.ndarray:
    a = np.asarray(d.values[0] if isinstance(d, ScalarGrid) else d, dtype=float)
    if a.ndim != 2:
        raise DomainError(f"{name} must be a 2-D map, got shape {a.shape}")
    return a


def check_points(points, name="points") -> np.ndarray:
    a = np.asarray(points.points if isinstance(points, PointCloud) else points, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3:
        raise DomainError(f"{name} must have shape (N, 3), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contain non-finite values")
    return a


def check_mask(mask, shape):
    if mask is None:
        return None
    m = np.asarray(mask, dtype=bool)
    if m.shape != tuple(shape):
        raise DomainError(f"mask shape {m.shape} != {tuple(shape)}")
    return m
