"""Perspective fields and pixel-height maps.

The up angle ``theta`` is measured clockwise from "straight up the image":
an image-space up vector is ``(sin theta, -cos theta)`` because image y
grows downward. Grids store the angle as the ``(sin theta, cos theta)`` pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, ScalarGrid, _as_rotation, pixel_centers, unproject
from .exceptions import DegenerateError, DomainError, NormalizationStateError

# rays closer than this (radians) to the zenith or nadir have no up direction
ZENITH_EPS = 1e-5

LATITUDE_CHANNELS = ("latitude",)
UP_CHANNELS = ("up_sin", "up_cos")
HEIGHT_CHANNELS = ("front_height", "back_height")


def _latitude_and_up(pixels, intr, pose):
    d = unproject(pixels, intr, pose)  # world frame, unnormalized
    norm = np.linalg.norm(d, axis=-1)
    lat = np.arcsin(np.clip(d[..., 2] / norm, -1.0, 1.0))

    R = _as_rotation(pose)
    u = R[:, 2]  # world up expressed in camera coordinates
    f = intr.focal
    cx, cy = intr.principal_point
    pixels = np.asarray(pixels, dtype=float)
    dx = (pixels[..., 0] - cx) / f
    dy = (pixels[..., 1] - cy) / f
    # projection Jacobian at depth 1 applied to the up direction
    ux = u[0] - dx * u[2]
    uy = u[1] - dy * u[2]
    un = np.hypot(ux, uy)
    # sine of the angle between the ray and the vertical axis
    sin_to_vertical = np.sqrt(np.clip(1.0 - (d[..., 2] / norm) ** 2, 0.0, 1.0))
    valid = (sin_to_vertical > math.sin(ZENITH_EPS)) & (un > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        up = np.stack([ux / un, uy / un], axis=-1)
    up[~valid] = np.nan
    return lat, up, valid


def latitude_at(p, intr: CameraIntrinsics, pose):
    """Elevation (radians) of the ray through pixel ``p`` above the horizontal."""
    lat, _, _ = _latitude_and_up(np.asarray(p, dtype=float), intr, pose)
    return lat if np.ndim(lat) else float(lat)


def up_vector_at(p, intr: CameraIntrinsics, pose):
    """Unit image-space direction of world up at pixel ``p``.

    Raises :class:`DegenerateError` when the ray is within ``ZENITH_EPS`` of
    the zenith or nadir.
    """
    _, up, valid = _latitude_and_up(np.asarray(p, dtype=float), intr, pose)
    if not np.all(valid):
        raise DegenerateError("ray too close to the zenith/nadir: up vector undefined")
    return up


def up_vector_to_angle(up):
    up = np.asarray(up, dtype=float)
    return np.arctan2(up[..., 0], -up[..., 1])


def angle_to_up_vector(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.sin(theta), -np.cos(theta)], axis=-1)


def encode_up_angle(theta):
    """``theta -> (sin theta, cos theta)``; works elementwise on arrays."""
    theta = np.asarray(theta, dtype=float)
    out = np.stack([np.sin(theta), np.cos(theta)], axis=-1)
    return tuple(float(v) for v in out) if out.ndim == 1 else out


def decode_up_angle(sc):
    """Recover ``theta`` in ``(-pi, pi]`` from a ``(sin, cos)`` pair (renormalized first)."""
    sc = np.asarray(sc, dtype=float)
    n = np.hypot(sc[..., 0], sc[..., 1])
    if np.any(n < 1e-6):
        raise DomainError("cannot decode an up angle from a near-zero (sin, cos) tuple")
    theta = np.arctan2(sc[..., 0] / n, sc[..., 1] / n)
    return float(theta) if theta.ndim == 0 else theta


def wrap_angle(a):
    """Wrap radians into ``[-pi, pi)``."""
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class PerspectiveField:
    """Latitude (1 channel) and up-angle (sin, cos) grids.

    Raw latitude is in radians; normalized latitude is mapped to [0, 1].
    """

    latitude: ScalarGrid
    up: ScalarGrid
    normalized: bool = False

    def __post_init__(self):
        if self.latitude.shape != self.up.shape:
            raise DomainError("latitude and up grids differ in size")
        if self.latitude.values.shape[0] != 1 or self.up.values.shape[0] != 2:
            raise DomainError("latitude needs 1 channel and up needs 2")

    @property
    def shape(self):
        return self.latitude.shape

    @property
    def valid(self):
        s, c = self.up.values.astype(float)
        ok = self.latitude.valid & self.up.valid
        ok &= np.isfinite(s) & np.isfinite(c) & (np.hypot(s, c) > 1e-6)
        return ok & np.isfinite(self.latitude.values[0])

    def latitude_radians(self):
        lat = self.latitude.values[0].astype(float)
        return lat * np.pi - np.pi / 2 if self.normalized else lat

    def up_angle(self):
        s, c = self.up.values.astype(float)
        with np.errstate(invalid="ignore"):
            return np.arctan2(s, c)

    def up_vectors(self):
        return angle_to_up_vector(self.up_angle())


@dataclass(frozen=True)
class PixelHeightMap:
    """Front (first entry) and back (last exit) pixel heights."""

    front: ScalarGrid
    back: ScalarGrid
    mask: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if self.front.shape != self.back.shape or mask.shape != self.front.shape:
            raise DomainError("pixel height grids and mask differ in size")
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self):
        return self.front.shape

    @property
    def front_valid(self):
        return self.mask & self.front.valid

    @property
    def back_valid(self):
        return self.mask & self.back.valid

    @classmethod
    def from_arrays(cls, front, back, mask, normalized=False):
        mask = np.asarray(mask, dtype=bool)
        front = np.asarray(front, dtype=np.float32)
        back = np.asarray(back, dtype=np.float32)
        fmask = mask & np.isfinite(front)
        bmask = mask & np.isfinite(back)
        return cls(
            ScalarGrid(np.where(fmask, front, np.nan)[None], ("front_height",), fmask),
            ScalarGrid(np.where(bmask, back, np.nan)[None], ("back_height",), bmask),
            mask,
            normalized,
        )


def render_perspective_field(intr: CameraIntrinsics, pose) -> PerspectiveField:
    """Dense latitude and up-vector field at every pixel center."""
    px = pixel_centers(intr.width, intr.height)
    lat, up, valid = _latitude_and_up(px, intr, pose)
    theta = up_vector_to_angle(up)
    up_sc = np.stack([np.sin(theta), np.cos(theta)])
    return PerspectiveField(
        ScalarGrid(lat[None], LATITUDE_CHANNELS),
        ScalarGrid(up_sc, UP_CHANNELS, valid),
    )


def normalize_heights(ph: PixelHeightMap, image_height):
    if ph.normalized:
        raise NormalizationStateError("pixel heights are already normalized")
    s = 1.0 / float(image_height)
    return PixelHeightMap(ph.front.with_values(ph.front.values * s), ph.back.with_values(ph.back.values * s), ph.mask, True)


def denormalize_heights(ph: PixelHeightMap, image_height):
    if not ph.normalized:
        raise NormalizationStateError("pixel heights are not normalized")
    s = float(image_height)
    return PixelHeightMap(
        ph.front.with_values(ph.front.values.astype(float) * s),
        ph.back.with_values(ph.back.values.astype(float) * s),
        ph.mask,
    )


def normalize_field(pf: PerspectiveField):
    if pf.normalized:
        raise NormalizationStateError("perspective field is already normalized")
    lat = (pf.latitude.values.astype(float) + np.pi / 2) / np.pi
    return PerspectiveField(pf.latitude.with_values(lat), pf.up, normalized=True)


def denormalize_field(pf: PerspectiveField):
    if not pf.normalized:
        raise NormalizationStateError("perspective field is not normalized")
    lat = pf.latitude.values.astype(float) * np.pi - np.pi / 2
    return PerspectiveField(pf.latitude.with_values(lat), pf.up)


def normalize_fields(ph: PixelHeightMap, pf: PerspectiveField, image_height):
    """Divide heights by the image height and map latitude from [-pi/2, pi/2] to [0, 1]."""
    if ph.normalized or pf.normalized:
        raise NormalizationStateError("fields are already normalized")
    return normalize_heights(ph, image_height), normalize_field(pf)


def denormalize_fields(ph: PixelHeightMap, pf: PerspectiveField, image_height):
    """Inverse of :func:`normalize_fields`."""
    if not ph.normalized or not pf.normalized:
        raise NormalizationStateError("fields are not normalized")
    return denormalize_heights(ph, image_height), denormalize_field(pf)
