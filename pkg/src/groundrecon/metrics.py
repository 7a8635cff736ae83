"""Depth, point-cloud and field metrics with scale-shift alignment and pitch buckets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud, ScalarGrid
from .exceptions import AlignmentError, DegenerateError, DomainError
from .fields import PerspectiveField, PixelHeightMap, denormalize_field, denormalize_heights, wrap_angle

DELTA1_THRESHOLD = 1.25
PITCH_BUCKETS = (("small", 0.0, 10.0), ("medium", 10.0, 30.0), ("large", 30.0, math.inf))

_METRICS = ("absrel", "delta1", "lsiv", "chamfer", "pixel_height_l1", "latitude_l1", "up_l1")


def _depth(d):
    if isinstance(d, ScalarGrid):
        return np.asarray(d.values[0], dtype=float), d.valid
    a = np.asarray(d, dtype=float)
    return a, np.ones(a.shape, dtype=bool)


def _mask(pred, gt, mask):
    p, pv = _depth(pred)
    g, gv = _depth(gt)
    if p.shape != g.shape:
        raise DomainError(f"prediction {p.shape} and ground truth {g.shape} differ in size")
    m = pv & gv & np.isfinite(p) & np.isfinite(g)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != g.shape:
            raise DomainError("mask and depth maps differ in size")
        m &= mask
    return p, g, m


def align_scale_shift(pred, gt, mask=None, space="depth"):
    """Least-squares ``(s, t)`` minimizing ``sum (s pred + t - gt)^2`` over the mask.

    ``space="disparity"`` fits ``s / pred + t`` to ``1 / gt`` instead and
    returns the depth map ``1 / (s / pred + t)``.
    """
    p, g, m = _mask(pred, gt, mask)
    if space == "disparity":
        m &= (p > 0) & (g > 0)
        with np.errstate(divide="ignore"):
            x, y = 1.0 / p[m], 1.0 / g[m]
    elif space == "depth":
        x, y = p[m], g[m]
    else:
        raise DomainError(f"unknown alignment space {space!r}")
    if x.size < 2:
        raise AlignmentError("need at least two masked pixels to align")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-300 or np.ptp(x) <= 1e-12 * max(abs(x).max(), 1e-300):
        raise AlignmentError("prediction is constant on the mask: scale and shift are not identifiable")
    s = float(xc @ (y - y.mean())) / sxx
    t = float(y.mean() - s * x.mean())
    with np.errstate(divide="ignore", invalid="ignore"):
        aligned = s * p + t if space == "depth" else 1.0 / (s / p + t)
    return s, t, np.where(m, aligned, np.nan)


def absrel_delta1(pred, gt, mask=None, return_count=False):
    """AbsRel and delta1 of an (already aligned) prediction.

    Non-positive predictions count as delta1 failures and are left out of
    AbsRel; their number is returned with ``return_count=True``.
    """
    p, g, m = _mask(pred, gt, mask)
    if not m.any():
        raise DomainError("empty evaluation mask")
    p, g = p[m], g[m]
    if np.any(g <= 0):
        raise DomainError("ground-truth depth must be positive on the mask")
    pos = p > 0
    n_bad = int((~pos).sum())
    absrel = float(np.mean(np.abs(p[pos] - g[pos]) / g[pos])) if pos.any() else math.nan
    ratio = np.maximum(p[pos] / g[pos], g[pos] / p[pos])
    delta1 = float(np.count_nonzero(ratio < DELTA1_THRESHOLD)) / p.size
    return (absrel, delta1, n_bad) if return_count else (absrel, delta1)


def _points(c):
    return np.asarray(c.points if isinstance(c, PointCloud) else c, dtype=float).reshape(-1, 3)


def chamfer_distance(a, b, workers=1):
    """Half the sum of the two mean nearest-neighbor Euclidean distances."""
    pa, pb = _points(a), _points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise DomainError("chamfer distance needs two nonempty clouds")
    da, _ = cKDTree(pb).query(pa, workers=workers)
    db, _ = cKDTree(pa).query(pb, workers=workers)
    return 0.5 * (float(da.mean()) + float(db.mean()))


def pair_clouds(pred, gt):
    """Corresponding rows of two clouds, matched by source pixel when both carry one."""
    if isinstance(pred, PointCloud) and isinstance(gt, PointCloud) and pred.pixels is not None and gt.pixels is not None:
        _, i, j = np.intersect1d(pred.pixels, gt.pixels, assume_unique=True, return_indices=True)
        return pred.points[i].astype(float), gt.points[j].astype(float)
    p, g = _points(pred), _points(gt)
    if p.shape != g.shape:
        raise DomainError("unpaired clouds must have the same number of points")
    return p, g


def lsiv_scale(pred, gt):
    p, g = pair_clouds(pred, gt)
    pp = float(np.einsum("ij,ij->", p, p))
    if pp == 0.0:
        raise DegenerateError("prediction has zero norm")
    return float(np.einsum("ij,ij->", p, g)) / pp


def lsiv(pred, gt):
    """RMSE between ``s* pred`` and ``gt`` at the optimal single scale ``s*``."""
    p, g = pair_clouds(pred, gt)
    if len(p) == 0:
        raise DomainError("no corresponding points")
    s = lsiv_scale(p, g)
    r = s * p - g
    return math.sqrt(float(np.einsum("ij,ij->", r, r)) / len(p))


def field_errors(pred, gt, mask=None):
    """``(height L1 px, latitude L1 deg, up L1 deg)`` between ``(PixelHeightMap,
    PerspectiveField)`` pairs; either member may be ``None`` (its errors are nan)."""
    ph, pf = pred
    gh, gf = gt
    m_user = None if mask is None else np.asarray(mask, dtype=bool)

    def restrict(m):
        if m_user is not None:
            if m_user.shape != m.shape:
                raise DomainError("mask and fields differ in size")
            m = m & m_user
        if not m.any():
            raise DomainError("empty evaluation mask")
        return m

    h_l1 = math.nan
    if ph is not None and gh is not None:
        if ph.shape != gh.shape:
            raise DomainError("pixel-height maps differ in size")
        H = ph.shape[0]
        ph = denormalize_heights(ph, H) if ph.normalized else ph
        gh = denormalize_heights(gh, H) if gh.normalized else gh
        diffs = []
        for a, b in ((ph.front, gh.front), (ph.back, gh.back)):
            m = restrict(a.valid & b.valid & gh.mask)
            diffs.append(np.abs(a.values[0].astype(float) - b.values[0].astype(float))[m])
        h_l1 = float(np.mean(np.concatenate(diffs)))

    lat_l1 = up_l1 = math.nan
    if pf is not None and gf is not None:
        if pf.shape != gf.shape:
            raise DomainError("perspective fields differ in size")
        pf = denormalize_field(pf) if pf.normalized else pf
        gf = denormalize_field(gf) if gf.normalized else gf
        m = restrict(pf.valid & gf.valid)
        lat_l1 = float(np.degrees(np.mean(np.abs(pf.latitude_radians() - gf.latitude_radians())[m])))
        d = np.abs(wrap_angle(pf.up_angle() - gf.up_angle()))[m]
        up_l1 = float(np.degrees(np.mean(d)))
    return h_l1, lat_l1, up_l1


@dataclass
class EvalReport:
    """Metric means over ``count`` samples; nan marks a metric that was not computed."""

    absrel: float = math.nan
    delta1: float = math.nan
    lsiv: float = math.nan
    chamfer: float = math.nan
    pixel_height_l1: float = math.nan
    latitude_l1: float = math.nan
    up_l1: float = math.nan
    count: int = 1
    nonpositive: int = 0
    buckets: Dict[str, "EvalReport"] = field(default_factory=dict)
    bucket_counts: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in _METRICS:
            v = getattr(self, name)
            if v is None:
                v = math.nan
            v = float(v)
            if v < 0:
                raise DomainError(f"{name} must be non-negative")
            setattr(self, name, v)
        if self.delta1 > 1:
            raise DomainError("delta1 is a fraction")

    def to_dict(self):
        out = {k: (None if math.isnan(getattr(self, k)) else getattr(self, k)) for k in _METRICS}
        out["count"] = self.count
        out["nonpositive"] = self.nonpositive
        if self.buckets or self.bucket_counts:
            out["bucket_counts"] = dict(self.bucket_counts)
            out["buckets"] = {k: (None if v is None else v.to_dict()) for k, v in self.buckets.items()}
        return out

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)} - {"buckets"}
        kw = {k: v for k, v in d.items() if k in names}
        kw["buckets"] = {k: (None if v is None else cls.from_dict(v)) for k, v in d.get("buckets", {}).items()}
        return cls(**kw)


def aggregate(reports) -> EvalReport:
    """Count-weighted mean of each metric, skipping reports where it is nan."""
    reports = list(reports)
    if not reports:
        raise DomainError("nothing to aggregate")
    out = {}
    w = np.array([r.count for r in reports], dtype=float)
    for name in _METRICS:
        v = np.array([getattr(r, name) for r in reports], dtype=float)
        ok = ~np.isnan(v)
        out[name] = float(np.average(v[ok], weights=w[ok])) if ok.any() else math.nan
        if ok.all() and np.all(v == v[0]):
            out[name] = float(v[0])  # keep constants exact
    return EvalReport(**out, count=int(w.sum()), nonpositive=sum(r.nonpositive for r in reports))


def pitch_bucket(delta_deg):
    d = abs(float(delta_deg))
    for name, lo, hi in PITCH_BUCKETS:
        if lo <= d < hi or (name == "medium" and d == hi):
            return name
    return PITCH_BUCKETS[-1][0]


def pitch_bucket_report(samples, mean_pitch=None) -> EvalReport:
    """Aggregate ``(EvalReport, gt pitch)`` samples overall and per distance of the
    pitch from the dataset mean: below 10 deg, 10 to 30 deg, above 30 deg."""
    samples = list(samples)
    if not samples:
        raise DomainError("no samples")
    if mean_pitch is None:
        mean_pitch = float(np.mean([p for _, p in samples]))
    groups = {name: [] for name, _, _ in PITCH_BUCKETS}
    for rep, pitch in samples:
        groups[pitch_bucket(pitch - mean_pitch)].append(rep)
    total = aggregate(rep for rep, _ in samples)
    buckets = {k: (aggregate(v) if v else None) for k, v in groups.items()}
    counts = {k: sum(r.count for r in v) for k, v in groups.items()}
    return replace(total, buckets=buckets, bucket_counts=counts)


def evaluate_sample(
    pred_depth=None,
    gt_depth=None,
    mask=None,
    pred_cloud=None,
    gt_cloud=None,
    pred_fields=None,
    gt_fields=None,
    align=True,
    space="depth",
    calibrate_chamfer=True,
) -> EvalReport:
    """One-sample report from whichever prediction/ground-truth pairs are given."""
    kw = {}
    if pred_depth is not None and gt_depth is not None:
        d = pred_depth
        if align:
            _, _, d = align_scale_shift(pred_depth, gt_depth, mask, space)
        kw["absrel"], kw["delta1"], kw["nonpositive"] = absrel_delta1(d, gt_depth, mask, return_count=True)
    if pred_cloud is not None and gt_cloud is not None:
        kw["lsiv"] = lsiv(pred_cloud, gt_cloud)
        p = _points(pred_cloud)
        if calibrate_chamfer:
            p = p * lsiv_scale(pred_cloud, gt_cloud)
        kw["chamfer"] = chamfer_distance(p, gt_cloud)
    if pred_fields is not None and gt_fields is not None:
        kw["pixel_height_l1"], kw["latitude_l1"], kw["up_l1"] = field_errors(pred_fields, gt_fields, mask)
    return EvalReport(**kw)
