"""Bounding volume hierarchy over triangles with ray-packet traversal.

Traversal carries the subset of rays alive at each node, so the per-node work
is a vectorized slab test and the per-leaf work a vectorized Moller-Trumbore
test over (rays x leaf triangles).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 8
_EPS_T = 1e-9


@dataclass
class FlatBVH:
    lo: np.ndarray  # (N, 3) node bounds
    hi: np.ndarray
    left: np.ndarray  # child node ids, -1 for leaves
    right: np.ndarray
    start: np.ndarray  # leaf triangle ranges into ``order``
    count: np.ndarray
    order: np.ndarray  # triangle permutation
    tris: np.ndarray  # (T, 3, 3)


def build_bvh(tris: np.ndarray, leaf_size: int = LEAF_SIZE) -> FlatBVH:
    """Median split along the widest centroid axis."""
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
    centroids = tris.mean(axis=1)
    tmin = tris.min(axis=1)
    tmax = tris.max(axis=1)
    order = np.arange(len(tris))
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node(s, e):
        idx = order[s:e]
        lo.append(tmin[idx].min(axis=0) if e > s else np.zeros(3))
        hi.append(tmax[idx].max(axis=0) if e > s else np.zeros(3))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(lo) - 1

    root = new_node(0, len(tris))
    stack = [(root, 0, len(tris))]
    while stack:
        node, s, e = stack.pop()
        if e - s <= leaf_size:
            continue
        c = centroids[order[s:e]]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        sub = order[s:e][np.argsort(c[:, axis], kind="stable")]
        order[s:e] = sub
        mid = (s + e) // 2
        l_id = new_node(s, mid)
        r_id = new_node(mid, e)
        left[node], right[node] = l_id, r_id
        count[node] = 0
        stack.append((l_id, s, mid))
        stack.append((r_id, mid, e))

    return FlatBVH(
        np.array(lo).reshape(-1, 3),
        np.array(hi).reshape(-1, 3),
        np.array(left),
        np.array(right),
        np.array(start),
        np.array(count),
        order,
        tris,
    )


def _ray_box(o, inv_d, lo, hi):
    with np.errstate(invalid="ignore"):
        t0 = (lo - o) * inv_d
        t1 = (hi - o) * inv_d
    tmin = np.nanmax(np.minimum(t0, t1), axis=1)
    tmax = np.nanmin(np.maximum(t0, t1), axis=1)
    return (tmax >= np.maximum(tmin, 0.0))


def moller_trumbore(o, d, tris):
    """Hit parameters of rays ``(R, 3)`` against triangles ``(T, 3, 3)``; ``nan`` for misses."""
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    pvec = np.cross(d[:, None, :], e2[None])  # (R, T, 3)
    det = np.einsum("rtk,tk->rt", pvec, e1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        tvec = o[:, None, :] - v0[None]
        u = np.einsum("rtk,rtk->rt", tvec, pvec) * inv
        qvec = np.cross(tvec, e1[None])
        v = np.einsum("rtk,rk->rt", qvec, d) * inv
        t = np.einsum("rtk,tk->rt", qvec, e2) * inv
    ok = (np.abs(det) > 1e-14) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > _EPS_T)
    return np.where(ok, t, np.nan)


def intersect_bvh(bvh: FlatBVH, o, d):
    """Smallest and largest positive hit per ray plus the nearest face index (-1 on miss)."""
    n = o.shape[0]
    t_first = np.full(n, np.inf)
    t_last = np.full(n, -np.inf)
    face = np.full(n, -1, dtype=np.int64)
    if len(bvh.tris) == 0:
        return t_first, t_last, face
    with np.errstate(divide="ignore"):
        inv_d = 1.0 / d
    stack = [(0, np.arange(n))]
    while stack:
        node, rays = stack.pop()
        keep = _ray_box(o[rays], inv_d[rays], bvh.lo[node], bvh.hi[node])
        rays = rays[keep]
        if rays.size == 0:
            continue
        if bvh.left[node] < 0:
            s, c = bvh.start[node], bvh.count[node]
            ids = bvh.order[s : s + c]
            t = moller_trumbore(o[rays], d[rays], bvh.tris[ids])
            has = ~np.all(np.isnan(t), axis=1)
            if not has.any():
                continue
            r, t = rays[has], t[has]
            j = np.nanargmin(t, axis=1)
            tmin = t[np.arange(len(r)), j]
            tmax = np.nanmax(t, axis=1)
            closer = tmin < t_first[r]
            t_first[r[closer]] = tmin[closer]
            face[r[closer]] = ids[j[closer]]
            t_last[r] = np.maximum(t_last[r], tmax)
        else:
            stack.append((bvh.left[node], rays))
            stack.append((bvh.right[node], rays))
    return t_first, t_last, face
