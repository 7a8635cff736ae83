"""Shadows and planar reflections on the reconstructed ground plane."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import GroundPlane, PointCloud, ScalarGrid, project
from .exceptions import DomainError

log = logging.getLogger(__name__)

REFLECTION_ALPHA = 0.6
REFLECTION_FALLOFF = 0.5


@dataclass(frozen=True)
class LightSpec:
    """Directional light (``direction`` = travel direction, must point downward)
    or point light at ``position``; ``softness`` is a Gaussian blur sigma in pixels."""

    kind: str = "directional"
    direction: Optional[Tuple[float, float, float]] = None
    position: Optional[Tuple[float, float, float]] = None
    softness: float = 0.0

    def __post_init__(self):
        if self.softness < 0:
            raise DomainError("softness must be >= 0")
        if self.kind == "directional":
            if self.direction is None:
                raise DomainError("directional light needs a direction")
            d = np.asarray(self.direction, dtype=float)
            n = np.linalg.norm(d)
            if n == 0 or not d[2] < 0:
                raise DomainError("directional light must point downward (negative z)")
            if abs(n - 1.0) > 1e-12:
                d = d / n
            object.__setattr__(self, "direction", tuple(float(v) for v in d))
        elif self.kind == "point":
            if self.position is None:
                raise DomainError("point light needs a position")
            object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        else:
            raise DomainError(f"unknown light kind {self.kind!r}")

    @classmethod
    def directional(cls, direction, softness=0.0):
        return cls("directional", direction=tuple(direction), softness=softness)

    @classmethod
    def point(cls, position, softness=0.0):
        return cls("point", position=tuple(position), softness=softness)

    @classmethod
    def from_elevation(cls, elevation_deg, azimuth_deg=0.0, softness=0.0):
        """Directional light coming from the given elevation above the horizon."""
        el, az = np.radians(elevation_deg), np.radians(azimuth_deg)
        toward = np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])
        return cls.directional(tuple(-toward), softness)


def shadow_points(points, ground: GroundPlane, light: LightSpec):
    """Ground points hit by the shadow of each point. Returns ``(S, ok)``;
    rows with ``ok == False`` (point at or above a point light) are nan."""
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    zg = ground.z_const
    if light.kind == "directional":
        l = np.asarray(light.direction)
        S = P - ((P[:, 2] - zg) / l[2])[:, None] * l
        ok = np.ones(len(P), dtype=bool)
    else:
        Q = np.asarray(light.position)
        if not Q[2] > zg:
            raise DomainError("point light must lie strictly above the ground")
        ok = P[:, 2] < Q[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = (zg - Q[2]) / (P[:, 2] - Q[2])
        S = Q + (P - Q) * k[:, None]
        S[~ok] = np.nan
    S[ok, 2] = zg
    return S, ok


def splat_bilinear(pixels, image_shape, weights=None):
    """Accumulate points into a grid, each spread over its 4 nearest pixel centers."""
    H, W = image_shape
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    w = np.ones(len(pixels)) if weights is None else np.asarray(weights, dtype=float)
    u = pixels[:, 0] - 0.5
    v = pixels[:, 1] - 0.5
    ok = np.isfinite(u) & np.isfinite(v)
    u, v, w = u[ok], v[ok], w[ok]
    j0 = np.floor(u).astype(np.int64)
    i0 = np.floor(v).astype(np.int64)
    fu = u - j0
    fv = v - i0
    acc = np.zeros(H * W)
    for di, dj, wk in ((0, 0, (1 - fu) * (1 - fv)), (0, 1, fu * (1 - fv)), (1, 0, (1 - fu) * fv), (1, 1, fu * fv)):
        ii, jj = i0 + di, j0 + dj
        inside = (ii >= 0) & (ii < H) & (jj >= 0) & (jj < W)
        acc += np.bincount(ii[inside] * W + jj[inside], weights=(w * wk)[inside], minlength=H * W)
    return acc.reshape(H, W)


def fill_between(front: PointCloud, back: PointCloud, samples=8) -> PointCloud:
    """Solid cloud from front/back surface pairs: ``samples`` evenly spaced points on
    each chord, endpoints included. Pixels present in only one cloud keep that point."""
    if front.pixels is None or back.pixels is None:
        raise DomainError("filling needs source-pixel indices on both clouds")
    if samples < 2:
        raise DomainError("need at least two samples per chord")
    common, fi, bi = np.intersect1d(front.pixels, back.pixels, return_indices=True)
    t = np.linspace(0.0, 1.0, samples)
    a, b = front.points[fi], back.points[bi]
    chords = a[:, None] + t[None, :, None] * (b - a)[:, None]
    only = np.setdiff1d(np.arange(len(front)), fi)
    points = np.concatenate([chords.reshape(-1, 3), front.points[only]])
    pixels = np.concatenate([np.repeat(common, samples), front.pixels[only]])
    colors = None
    if front.colors is not None:
        colors = np.concatenate([np.repeat(front.colors[fi], samples, axis=0), front.colors[only]])
    return PointCloud(points, pixels, colors, image_shape=front.image_shape)


def cast_shadow(cloud: PointCloud, ground: GroundPlane, light: LightSpec, camera, image_shape) -> ScalarGrid:
    """Shadow coverage in [0, 1] of ``cloud`` on the ground, seen from ``camera``."""
    if len(cloud) == 0:
        raise DomainError("cannot cast a shadow from an empty cloud")
    intr, pose = camera
    S, ok = shadow_points(cloud.points, ground, light)
    if (~ok).any():
        log.warning("skipped %d points at or above the point light", int((~ok).sum()))
    px, z = project(S[ok], intr, pose)
    acc = splat_bilinear(px[z > 0], image_shape)
    if light.softness > 0:
        acc = gaussian_filter(acc, light.softness, mode="constant")
    return ScalarGrid(np.clip(acc, 0.0, 1.0)[None], ("shadow",))


def mirror_points(points, ground: GroundPlane):
    P = np.array(points, dtype=float).reshape(-1, 3)
    P[:, 2] = 2.0 * ground.z_const - P[:, 2]
    return P


def reflection_alpha(height_above_ground, base_alpha=REFLECTION_ALPHA, falloff=REFLECTION_FALLOFF):
    return base_alpha * np.exp(-np.asarray(height_above_ground, dtype=float) / falloff)


def render_reflection(
    cloud: PointCloud,
    ground: GroundPlane,
    camera,
    image_shape,
    base_alpha=REFLECTION_ALPHA,
    falloff=REFLECTION_FALLOFF,
) -> ScalarGrid:
    """RGBA layer of the cloud mirrored in the ground; nearest mirrored point wins each pixel.

    Pass a solid cloud (see :func:`fill_between`) for a hole-free reflection:
    the mirrored view sees the underside, which neither visible surface covers.
    """
    if cloud.colors is None:
        raise DomainError("reflections need a colored cloud")
    intr, pose = camera
    H, W = image_shape
    mirrored = mirror_points(cloud.points, ground)
    px, z = project(mirrored, intr, pose)
    j = np.floor(px[:, 0])
    i = np.floor(px[:, 1])
    ok = (z > 0) & (j >= 0) & (j < W) & (i >= 0) & (i < H)
    idx = np.flatnonzero(ok)
    flat = (i[ok] * W + j[ok]).astype(np.int64)
    # z-buffer: nearest depth, then lowest point index
    order = np.lexsort((idx, z[ok], flat))
    flat, idx = flat[order], idx[order]
    first = np.ones(len(flat), dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    flat, idx = flat[first], idx[first]

    layer = np.zeros((4, H * W))
    layer[:3, flat] = cloud.colors[idx].T / 255.0
    layer[3, flat] = reflection_alpha(cloud.points[idx, 2] - ground.z_const, base_alpha, falloff)
    return ScalarGrid(layer.reshape(4, H, W), ("red", "green", "blue", "alpha"))


def composite_shadow(image, shadow, object_mask=None, strength=0.6):
    """Darken ``image`` (3, H, W) in [0, 1] by the shadow layer outside the object."""
    img = np.asarray(image, dtype=float)
    s = np.asarray(shadow, dtype=float).reshape(img.shape[1:])
    if object_mask is not None:
        s = np.where(np.asarray(object_mask, dtype=bool), 0.0, s)
    return img * (1.0 - strength * s)[None]


def composite_reflection(image, layer, object_mask=None):
    """Alpha-blend an RGBA reflection layer under the object."""
    img = np.asarray(image, dtype=float)
    layer = np.asarray(layer, dtype=float)
    a = layer[3]
    if object_mask is not None:
        a = np.where(np.asarray(object_mask, dtype=bool), 0.0, a)
    return img * (1.0 - a)[None] + layer[:3] * a[None]

