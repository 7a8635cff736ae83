"""Camera model, frame conventions and the shared grid / point containers.

World frame: right-handed, Z up, camera at the origin. With zero pitch and
roll the optical axis is world +Y and image x runs along world +X.
Camera frame: x right, y down, z forward. ``R`` maps world directions to
camera directions and is composed as base -> pitch -> roll.

Pixel ``(x, y)`` addresses column ``x`` and row ``y``; the center of pixel
``(j, i)`` sits at ``(j + 0.5, i + 0.5)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import DomainError

# world -> camera at zero pitch / roll
_R_BASE = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


def focal_from_fov(fov_deg, image_height):
    """Focal length in pixels for a vertical field of view."""
    fov_deg = float(fov_deg)
    if not 0.0 < fov_deg < 180.0 or not math.isfinite(fov_deg):
        raise DomainError(f"fov_deg must lie in (0, 180), got {fov_deg}")
    if image_height < 1:
        raise DomainError(f"image_height must be >= 1, got {image_height}")
    return image_height / (2.0 * math.tan(math.radians(fov_deg) / 2.0))


def fov_from_focal(focal, image_height):
    """Inverse of :func:`focal_from_fov`."""
    if focal <= 0:
        raise DomainError(f"focal must be positive, got {focal}")
    return math.degrees(2.0 * math.atan(image_height / (2.0 * focal)))


def rotation_matrix(pitch_deg, roll_deg):
    """World-to-camera rotation for the given pitch and roll (degrees)."""
    p = math.radians(pitch_deg)
    r = math.radians(roll_deg)
    cp, sp = math.cos(p), math.sin(p)
    cr, sr = math.cos(r), math.sin(r)
    r_pitch = np.array([[1.0, 0.0, 0.0], [0.0, cp, sp], [0.0, -sp, cp]])
    r_roll = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    return r_roll @ r_pitch @ _R_BASE


def yaw_matrix(yaw_deg):
    """Rotation about world Z; positive yaw turns +Y toward -X."""
    y = math.radians(yaw_deg)
    c, s = math.cos(y), math.sin(y)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics parametrized by vertical field of view.

    ``principal_point`` defaults to the image center.
    """

    fov_deg: float
    width: int
    height: int
    principal_point: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not (0.0 < float(self.fov_deg) < 180.0):
            raise DomainError(f"fov_deg must lie in (0, 180), got {self.fov_deg}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise DomainError(f"image size must be >= 1, got {self.width}x{self.height}")
        object.__setattr__(self, "fov_deg", float(self.fov_deg))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if self.principal_point is None:
            pp = (self.width / 2.0, self.height / 2.0)
        else:
            pp = (float(self.principal_point[0]), float(self.principal_point[1]))
        object.__setattr__(self, "principal_point", pp)

    @classmethod
    def from_focal(cls, focal, width, height, principal_point=None):
        return cls(fov_from_focal(focal, height), width, height, principal_point)

    @property
    def focal(self):
        return focal_from_fov(self.fov_deg, self.height)

    @property
    def K(self):
        return intrinsic_matrix(self)

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass(frozen=True)
class CameraPose:
    """Ground-relative camera rotation. Positive pitch looks up; positive
    roll is a counter-clockwise body rotation seen from behind the camera."""

    pitch_deg: float = 0.0
    roll_deg: float = 0.0

    def __post_init__(self):
        pitch, roll = float(self.pitch_deg), float(self.roll_deg)
        if not -90.0 <= pitch <= 90.0:
            raise DomainError(f"pitch_deg must lie in [-90, 90], got {pitch}")
        if not math.isfinite(roll):
            raise DomainError(f"roll_deg must be finite, got {roll}")
        # wrap into (-180, 180]
        roll = -((-roll + 180.0) % 360.0 - 180.0)
        object.__setattr__(self, "pitch_deg", pitch)
        object.__setattr__(self, "roll_deg", roll)

    @property
    def R(self):
        return rotation_matrix(self.pitch_deg, self.roll_deg)


def intrinsic_matrix(intr: CameraIntrinsics) -> np.ndarray:
    f = intr.focal
    cx, cy = intr.principal_point
    return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])


def _as_rotation(pose_or_R):
    if isinstance(pose_or_R, CameraPose):
        return pose_or_R.R
    return np.asarray(pose_or_R, dtype=float)


def unproject(pixels, intr: CameraIntrinsics, pose) -> np.ndarray:
    """Unnormalized world directions ``R^-1 K^-1 (x, y, 1)`` for ``(..., 2)`` pixels.

    ``pose`` may be a :class:`CameraPose` or an explicit 3x3 world-to-camera
    rotation (used for yawed cameras). No bounds checks are made.
    """
    pixels = np.asarray(pixels, dtype=float)
    f = intr.focal
    cx, cy = intr.principal_point
    cam = np.stack(
        [(pixels[..., 0] - cx) / f, (pixels[..., 1] - cy) / f, np.ones(pixels.shape[:-1])],
        axis=-1,
    )
    # R^-1 = R^T; row-vector form: cam @ R
    return cam @ _as_rotation(pose)


def pixel_ray_world(p, intr: CameraIntrinsics, pose) -> np.ndarray:
    """Unit world-frame direction of the ray through pixel ``p``.

    Accepts a single ``(x, y)`` or an array of shape ``(..., 2)``.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p[..., 0] < 0) or np.any(p[..., 0] > intr.width) or np.any(p[..., 1] < 0) or np.any(
        p[..., 1] > intr.height
    ):
        raise DomainError("pixel outside image bounds")
    d = unproject(p, intr, pose)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def world_to_camera(points, pose) -> np.ndarray:
    return np.asarray(points, dtype=float) @ _as_rotation(pose).T


def project(points, intr: CameraIntrinsics, pose):
    """Project ``(..., 3)`` world points (camera at origin).

    Returns ``(pixels, z_cam)``; pixels are meaningless where ``z_cam <= 0``.
    """
    cam = world_to_camera(points, pose)
    z = cam[..., 2]
    f = intr.focal
    cx, cy = intr.principal_point
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.stack([f * cam[..., 0] / z + cx, f * cam[..., 1] / z + cy], axis=-1)
    return px, z


def pixel_centers(width, height) -> np.ndarray:
    """``(H, W, 2)`` array of pixel-center coordinates ``(x, y)``."""
    xs = np.arange(width, dtype=float) + 0.5
    ys = np.arange(height, dtype=float) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def _readonly(a):
    v = a.view()
    v.flags.writeable = False
    return v


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """Channel-planar float32 image of shape ``(C, H, W)`` with an optional
    ``(H, W)`` validity mask (True = valid)."""

    values: np.ndarray
    channels: Tuple[str, ...]
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim == 2:
            values = values[None]
        if values.ndim != 3:
            raise DomainError(f"grid values must be (C, H, W), got shape {values.shape}")
        channels = tuple(str(c) for c in self.channels)
        if len(channels) != values.shape[0]:
            raise DomainError(f"{len(channels)} channel names for {values.shape[0]} channels")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != values.shape[1:]:
                raise DomainError(f"mask shape {mask.shape} != grid shape {values.shape[1:]}")
            bad = ~np.isfinite(values) & mask[None]
        else:
            bad = ~np.isfinite(values)
        if bad.any():
            raise DomainError("non-finite values at valid pixels")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "mask", None if mask is None else _readonly(mask))

    @property
    def height(self):
        return self.values.shape[1]

    @property
    def width(self):
        return self.values.shape[2]

    @property
    def shape(self):
        return self.values.shape[1:]

    def channel(self, name) -> np.ndarray:
        try:
            return self.values[self.channels.index(name)]
        except ValueError:
            raise KeyError(f"no channel {name!r} in {self.channels}") from None

    @property
    def valid(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return np.asarray(self.mask)

    def with_values(self, values, mask="keep"):
        return ScalarGrid(values, self.channels, self.mask if mask == "keep" else mask)

    def __eq__(self, other):
        if not isinstance(other, ScalarGrid):
            return NotImplemented
        same_mask = (self.mask is None and other.mask is None) or (
            self.mask is not None and other.mask is not None and np.array_equal(self.mask, other.mask)
        )
        return (
            self.channels == other.channels
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
            and same_mask
        )


@dataclass(frozen=True, eq=False)
class PointCloud:
    """3D points with optional source-pixel raster indices and uint8 colors."""

    points: np.ndarray
    pixels: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None
    image_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise DomainError("point coordinates must be finite")
        object.__setattr__(self, "points", _readonly(pts))
        if self.pixels is not None:
            pix = np.asarray(self.pixels, dtype=np.int64).reshape(-1)
            if pix.shape[0] != pts.shape[0]:
                raise DomainError("pixel index count does not match point count")
            if self.image_shape is not None:
                h, w = self.image_shape
                if pix.size and (pix.min() < 0 or pix.max() >= h * w):
                    raise DomainError("source pixel index outside the image")
            object.__setattr__(self, "pixels", _readonly(pix))
        if self.colors is not None:
            col = np.asarray(self.colors)
            if col.dtype != np.uint8:
                col = np.clip(np.round(np.asarray(col, dtype=float) * 255.0), 0, 255).astype(np.uint8)
            col = col.reshape(-1, 3)
            if col.shape[0] != pts.shape[0]:
                raise DomainError("color count does not match point count")
            object.__setattr__(self, "colors", _readonly(col))

    def __len__(self):
        return self.points.shape[0]

    def subset(self, index):
        return PointCloud(
            self.points[index],
            None if self.pixels is None else self.pixels[index],
            None if self.colors is None else self.colors[index],
            self.image_shape,
        )


@dataclass(frozen=True)
class GroundPlane:
    """Horizontal plane ``z = z_const`` in the camera-centered world frame."""

    z_const: float = -1.0


RECONSTRUCTION_GROUND = GroundPlane(-1.0)
SCENE_GROUND = GroundPlane(0.0)
