"""Ray/primitive intersection.

Every primitive exposes ``interval(origins, dirs)`` returning the entry and
exit parameters of each ray against the solid plus the surface normal at the
entry point. Rays that miss get ``t_in = +inf`` and ``t_out = -inf``.
Directions are assumed unit length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ..exceptions import SceneError
from .bvh import build_bvh, intersect_bvh

_INF = np.inf
Color = Tuple[float, float, float]


def _miss(n):
    return np.full(n, _INF), np.full(n, -_INF), np.zeros((n, 3))


@dataclass(frozen=True)
class Sphere:
    center: Tuple[float, float, float]
    radius: float
    albedo: Color = (0.8, 0.8, 0.8)

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneError("sphere radius must be positive")

    @property
    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def interval(self, o, d):
        c = np.asarray(self.center, dtype=float)
        oc = o - c
        b = np.einsum("ij,ij->i", oc, d)
        cc = np.einsum("ij,ij->i", oc, oc) - self.radius**2
        disc = b * b - cc
        # grazing rays: tolerate round-off below zero
        tol = 1e-12 * max(self.radius**2, 1.0)
        hit = disc >= -tol
        sq = np.sqrt(np.clip(disc, 0.0, None))
        t_in = np.where(hit, -b - sq, _INF)
        t_out = np.where(hit, -b + sq, -_INF)
        with np.errstate(invalid="ignore"):
            n = (o + t_in[:, None] * d - c) / self.radius
        n[~hit] = 0.0
        return t_in, t_out, n


def _slab(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t0 = (lo - o) * inv
        t1 = (hi - o) * inv
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    # rays parallel to a slab: inside -> unbounded, outside -> empty
    par = d == 0.0
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(par, np.where(inside, -_INF, _INF), tmin)
    tmax = np.where(par, np.where(inside, _INF, -_INF), tmax)
    return tmin, tmax


@dataclass(frozen=True)
class Box:
    """Box with half extents, rotated about the vertical axis by ``yaw_deg``."""

    center: Tuple[float, float, float]
    half_extents: Tuple[float, float, float]
    yaw_deg: float = 0.0
    albedo: Color = (0.8, 0.8, 0.8)

    def __post_init__(self):
        if min(self.half_extents) <= 0:
            raise SceneError("box half extents must be positive")

    def _rot(self):
        y = math.radians(self.yaw_deg)
        c, s = math.cos(y), math.sin(y)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    @property
    def bounds(self):
        R = self._rot()
        h = np.asarray(self.half_extents, dtype=float)
        ext = np.abs(R) @ h
        c = np.asarray(self.center, dtype=float)
        return c - ext, c + ext

    def interval(self, o, d):
        R = self._rot()
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.half_extents, dtype=float)
        lo_ = (o - c) @ R  # into the local frame (R^T applied to row vectors)
        ld = d @ R
        tmin, tmax = _slab(lo_, ld, -h, h)
        axis = np.argmax(tmin, axis=1)
        t_in = tmin.max(axis=1)
        t_out = tmax.min(axis=1)
        hit = (t_in <= t_out) & np.isfinite(t_in)
        n_local = np.zeros_like(o)
        rows = np.arange(o.shape[0])
        n_local[rows, axis] = -np.sign(ld[rows, axis])
        n = n_local @ R.T
        n[~hit] = 0.0
        return np.where(hit, t_in, _INF), np.where(hit, t_out, -_INF), n


@dataclass(frozen=True)
class Cylinder:
    """Vertical solid cylinder standing on ``base_center``."""

    base_center: Tuple[float, float, float]
    radius: float
    height: float
    albedo: Color = (0.8, 0.8, 0.8)

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise SceneError("cylinder radius and height must be positive")

    @property
    def bounds(self):
        b = np.asarray(self.base_center, dtype=float)
        r = self.radius
        return b - [r, r, 0.0], b + [r, r, self.height]

    def interval(self, o, d):
        b = np.asarray(self.base_center, dtype=float)
        ox, oy = o[:, 0] - b[0], o[:, 1] - b[1]
        dx, dy = d[:, 0], d[:, 1]
        a = dx * dx + dy * dy
        hb = ox * dx + oy * dy
        cc = ox * ox + oy * oy - self.radius**2
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = hb * hb - a * cc
            sq = np.sqrt(np.clip(disc, 0.0, None))
            c_in = (-hb - sq) / a
            c_out = (-hb + sq) / a
        vertical = a < 1e-300
        c_in = np.where(vertical, np.where(cc <= 0, -_INF, _INF), np.where(disc >= 0, c_in, _INF))
        c_out = np.where(vertical, np.where(cc <= 0, _INF, -_INF), np.where(disc >= 0, c_out, -_INF))
        z_in, z_out = _slab(o[:, 2:3], d[:, 2:3], b[2], b[2] + self.height)
        z_in, z_out = z_in[:, 0], z_out[:, 0]
        t_in = np.maximum(c_in, z_in)
        t_out = np.minimum(c_out, z_out)
        hit = (t_in <= t_out) & np.isfinite(t_in)
        p = o + np.where(hit, t_in, 0.0)[:, None] * d
        radial = np.stack([p[:, 0] - b[0], p[:, 1] - b[1], np.zeros(len(p))], axis=1) / self.radius
        cap = np.zeros_like(p)
        cap[:, 2] = -np.sign(d[:, 2])
        n = np.where((z_in >= c_in)[:, None], cap, radial)
        n[~hit] = 0.0
        return np.where(hit, t_in, _INF), np.where(hit, t_out, -_INF), n


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Closed triangle mesh; first/last hits come from a BVH sweep."""

    vertices: np.ndarray
    faces: np.ndarray
    albedo: Color = (0.8, 0.8, 0.8)
    _bvh: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise SceneError("mesh face references a missing vertex")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "_bvh", build_bvh(v[f]))

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def interval(self, o, d):
        t_first, t_last, face = intersect_bvh(self._bvh, o, d)
        tri = self.vertices[self.faces]
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        fn = np.cross(e1, e2)
        fn /= np.linalg.norm(fn, axis=1, keepdims=True)
        hit = face >= 0
        n = np.zeros_like(o)
        n[hit] = fn[face[hit]]
        # face the viewer
        flip = np.einsum("ij,ij->i", n, d) > 0
        n[flip] *= -1
        return np.where(hit, t_first, _INF), np.where(hit, t_last, -_INF), n
