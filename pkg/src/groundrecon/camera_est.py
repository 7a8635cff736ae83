"""Camera recovery (FoV, pitch, roll) from a perspective field by grid search.

The residual at a pixel is ``|latitude error| + |up-angle error|`` (both in
radians) and the cost is its mean over the evaluated pixels. A coarse sweep
over the full grid seeds a few refinement rounds, each re-centered on the
incumbent with a shrunken step; a last round evaluates the immediate
neighbourhood of the incumbent at full resolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numba
import numpy as np
from scipy.optimize import minimize

from .core import CameraIntrinsics, CameraPose, pixel_centers
from .exceptions import DomainError, EstimationError
from .fields import PerspectiveField, _latitude_and_up, up_vector_to_angle, wrap_angle


@dataclass(frozen=True)
class GridSpec:
    """Search ranges (degrees, inclusive), steps and refinement schedule.

    ``coarse_lattice`` and ``refine_lattice`` bound the side of the pixel
    lattice used for the coarse sweep and the refinement rounds.
    """

    fov_range: Tuple[float, float] = (20.0, 110.0)
    fov_step: float = 2.0
    pitch_range: Tuple[float, float] = (-70.0, 70.0)
    pitch_step: float = 2.0
    roll_range: Tuple[float, float] = (-45.0, 45.0)
    roll_step: float = 2.0
    levels: int = 3
    shrink: float = 0.25
    coarse_lattice: int = 8
    refine_lattice: int = 48
    polish: bool = False  # continuous Nelder-Mead descent from the grid minimizer

    def __post_init__(self):
        for name in ("fov", "pitch", "roll"):
            lo, hi = getattr(self, f"{name}_range")
            if not lo <= hi:
                raise DomainError(f"empty {name} range")
            if not getattr(self, f"{name}_step") > 0:
                raise DomainError(f"{name} step must be positive")
        if not 0 < self.shrink < 1:
            raise DomainError("shrink factor must lie in (0, 1)")
        if self.levels < 0:
            raise DomainError("refinement levels must be >= 0")
        lo, hi = self.fov_range
        if lo <= 0 or hi >= 180:
            raise DomainError("fov range must lie inside (0, 180)")
        if self.coarse_lattice < 1 or self.refine_lattice < 1 or self.refine_lattice > 128:
            raise DomainError("lattice sides must lie in [1, 128]")

    @property
    def final_step(self):
        k = self.shrink**self.levels
        return self.fov_step * k, self.pitch_step * k, self.roll_step * k


@dataclass
class CameraEstimate:
    fov_deg: float
    pitch_deg: float
    roll_deg: float
    cost: float
    history: List[float] = field(default_factory=list)  # refine-lattice cost of each incumbent

    def as_tuple(self):
        return self.fov_deg, self.pitch_deg, self.roll_deg, self.cost

    @property
    def camera(self):
        return self.fov_deg, self.pitch_deg, self.roll_deg


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _candidate_costs(params, px, py, lat_obs, theta_obs, height, cx, cy):
    n_cand = params.shape[0]
    n_pix = px.shape[0]
    out = np.empty(n_cand)
    two_pi = 2.0 * math.pi
    for k in range(n_cand):
        inv_f = 2.0 * math.tan(math.radians(params[k, 0]) / 2.0) / height
        p = math.radians(params[k, 1])
        r = math.radians(params[k, 2])
        cp = math.cos(p)
        # world up in camera coordinates
        u0 = math.sin(r) * cp
        u1 = -math.cos(r) * cp
        u2 = math.sin(p)
        acc = 0.0
        for i in range(n_pix):
            dx = (px[i] - cx) * inv_f
            dy = (py[i] - cy) * inv_f
            s = (dx * u0 + dy * u1 + u2) / math.sqrt(dx * dx + dy * dy + 1.0)
            s = min(1.0, max(-1.0, s))
            acc += abs(math.asin(s) - lat_obs[i])
            ux = u0 - dx * u2
            uy = u1 - dy * u2
            if ux * ux + uy * uy < 1e-24:
                acc += math.pi
                continue
            dt = math.atan2(ux, -uy) - theta_obs[i]
            if dt > math.pi:
                dt -= two_pi
            elif dt < -math.pi:
                dt += two_pi
            acc += abs(dt)
        out[k] = acc / n_pix
    return out


def _observed(observed: PerspectiveField, mask):
    valid = observed.valid
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != valid.shape:
            raise DomainError("mask and field differ in size")
        valid = valid & mask
    if not valid.any():
        raise EstimationError("no valid pixels in the perspective field")
    return valid, observed.latitude_radians(), observed.up_angle()


def perspective_field_cost(observed: PerspectiveField, candidate, mask=None) -> float:
    """Mean over masked pixels of latitude and up-angle absolute errors (radians)."""
    intr, pose = candidate
    if (intr.height, intr.width) != observed.shape:
        raise DomainError("candidate camera and field differ in size")
    valid, lat_obs, th_obs = _observed(observed, mask)
    px = pixel_centers(intr.width, intr.height)[valid]
    lat, up, ok = _latitude_and_up(px, intr, pose)
    th = up_vector_to_angle(up)
    up_err = np.where(ok, np.abs(wrap_angle(th - th_obs[valid])), np.pi)
    return float(np.mean(np.abs(lat - lat_obs[valid]) + up_err))


def _lattice(valid, side):
    """Flat indices of valid pixels on a (roughly) ``side x side`` lattice."""
    H, W = valid.shape
    rows = np.unique(np.round(np.linspace(0, H - 1, min(side, H))).astype(int))
    cols = np.unique(np.round(np.linspace(0, W - 1, min(side, W))).astype(int))
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    sel = valid[rr, cc]
    idx = (rr * W + cc)[sel]
    target = min(side * side, int(valid.sum()))
    if idx.size < target // 4:
        flat = np.flatnonzero(valid)
        idx = flat[np.unique(np.round(np.linspace(0, flat.size - 1, target)).astype(int))]
    return idx


def _axis(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def _window(center, step, half_steps, lo, hi):
    vals = center + step * np.arange(-half_steps, half_steps + 1)
    return vals[(vals >= lo) & (vals <= hi)]


def _product(fovs, pitches, rolls):
    g = np.stack(np.meshgrid(fovs, pitches, rolls, indexing="ij"), axis=-1)
    return np.ascontiguousarray(g.reshape(-1, 3))


def _select(params, costs):
    """Global minimizer with the (fov, |pitch|, |roll|) tie-break."""
    best = costs.min()
    tied = params[costs == best]
    order = np.lexsort((tied[:, 2], tied[:, 1], np.abs(tied[:, 2]), np.abs(tied[:, 1]), tied[:, 0]))
    return tied[order[0]], float(best)


class _Evaluator:
    def __init__(self, valid, lat, theta, height, cx, cy):
        self.lat, self.theta = lat.reshape(-1), theta.reshape(-1)
        self.valid = valid
        self.W = valid.shape[1]
        self.height, self.cx, self.cy = float(height), float(cx), float(cy)

    def costs(self, params, idx):
        px = (idx % self.W).astype(float) + 0.5
        py = (idx // self.W).astype(float) + 0.5
        return _candidate_costs(
            params, px, py, self.lat[idx], self.theta[idx], self.height, self.cx, self.cy
        )


def estimate_camera_detailed(
    observed: PerspectiveField, mask=None, grid: Optional[GridSpec] = None, principal_point=None
) -> CameraEstimate:
    grid = grid or GridSpec()
    H, W = observed.shape
    valid, lat, theta = _observed(observed, mask)
    cx, cy = principal_point if principal_point is not None else (W / 2.0, H / 2.0)
    ev = _Evaluator(valid, lat, theta, H, cx, cy)
    coarse_idx = _lattice(valid, grid.coarse_lattice)
    fine_idx = _lattice(valid, grid.refine_lattice)
    full_idx = np.flatnonzero(valid)

    fov_dom = (max(grid.fov_range[0] - grid.fov_step, 1e-3), min(grid.fov_range[1] + grid.fov_step, 179.0))
    pitch_dom = (max(grid.pitch_range[0] - grid.pitch_step, -90.0), min(grid.pitch_range[1] + grid.pitch_step, 90.0))
    roll_dom = (grid.roll_range[0] - grid.roll_step, grid.roll_range[1] + grid.roll_step)

    params = _product(
        _axis(*grid.fov_range, grid.fov_step),
        _axis(*grid.pitch_range, grid.pitch_step),
        _axis(*grid.roll_range, grid.roll_step),
    )
    best, _ = _select(params, ev.costs(params, coarse_idx))
    history = [float(ev.costs(best[None], fine_idx)[0])]

    steps = np.array([grid.fov_step, grid.pitch_step, grid.roll_step], dtype=float)
    for level in range(grid.levels):
        prev = steps
        steps = steps * grid.shrink
        # first round re-checks two coarse cells around the seed, later rounds one cell
        reach = 2.0 if level == 0 else 1.0
        half = int(round(reach / grid.shrink))
        params = _product(
            _window(best[0], steps[0], half, *fov_dom),
            _window(best[1], steps[1], half, *pitch_dom),
            _window(best[2], steps[2], half, *roll_dom),
        )
        best, cost = _select(params, ev.costs(params, fine_idx))
        history.append(cost)

    params = _product(
        _window(best[0], steps[0], 1, *fov_dom),
        _window(best[1], steps[1], 1, *pitch_dom),
        _window(best[2], steps[2], 1, *roll_dom),
    )
    best, cost = _select(params, ev.costs(params, full_idx))
    if grid.polish and cost > 0:
        best, cost = _polish(ev, best, cost, steps, fine_idx, full_idx, (fov_dom, pitch_dom, roll_dom))
    return CameraEstimate(float(best[0]), float(best[1]), float(best[2]), cost, history)


def _polish(ev, best, cost, steps, fine_idx, full_idx, domain):
    """Off-grid descent; kept only when it lowers the full-resolution cost."""
    lo = np.array([d[0] for d in domain])
    hi = np.array([d[1] for d in domain])
    simplex = np.vstack([best, best + np.diag(steps)])
    res = minimize(
        lambda x: ev.costs(np.clip(x, lo, hi)[None], fine_idx)[0],
        best,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-7, "fatol": 1e-12, "maxiter": 2000},
    )
    x = np.clip(res.x, lo, hi)
    c = float(ev.costs(x[None], full_idx)[0])
    return (x, c) if c < cost else (best, cost)


def estimate_camera(observed: PerspectiveField, mask=None, grid: Optional[GridSpec] = None):
    """Returns ``(fov_deg, pitch_deg, roll_deg, cost)``."""
    return estimate_camera_detailed(observed, mask, grid).as_tuple()


def camera_from_estimate(est, width, height):
    fov, pitch, roll = est[:3]
    return CameraIntrinsics(fov, width, height), CameraPose(pitch, roll)
