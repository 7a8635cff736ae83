"""Pixel height + perspective field -> scale-invariant point clouds and depth.

For a pixel ``p`` and its foot pixel ``p~`` (the image of the point's
vertical drop onto the ground), both are unprojected to world directions
``(X, Y, Z)`` and ``(X~, Y~, Z~)``. The ground direction is scaled so that
it meets the plane ``z = -1``, giving ``(X_n, Y_n, -1)``. The object point
shares its horizontal position with that ground point, so its depth scale is
the least-squares solution ``d = (X X_n + Y Y_n) / (X^2 + Y^2)`` and the
point is ``d (X, Y, Z)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    RECONSTRUCTION_GROUND,
    CameraIntrinsics,
    CameraPose,
    PointCloud,
    ScalarGrid,
    pixel_centers,
    unproject,
    world_to_camera,
)
from .exceptions import DomainError, ReconstructionError
from .fields import PerspectiveField, PixelHeightMap, _latitude_and_up, denormalize_heights

log = logging.getLogger(__name__)

EPS_Z = 1e-4
EPS_HORIZONTAL = 1e-12
GROUND_Z = RECONSTRUCTION_GROUND.z_const


def foot_pixel(p, height, up):
    """Step ``height`` pixels down the image along the local vertical ``up``."""
    p = np.asarray(p, dtype=float)
    up = np.asarray(up, dtype=float)
    height = np.asarray(height, dtype=float)
    if np.any(height < 0):
        raise DomainError("pixel height must be non-negative")
    return p - height[..., None] * up


@dataclass(frozen=True)
class UnprojectionPair:
    object_dir: np.ndarray
    ground_dir: np.ndarray
    ground_normalized: np.ndarray  # (X_n, Y_n)
    depth_scale: np.ndarray
    valid: np.ndarray


def unprojection_pair(p, p_foot, intr: CameraIntrinsics, pose, eps_z=EPS_Z) -> UnprojectionPair:
    obj = unproject(p, intr, pose)
    gnd = unproject(p_foot, intr, pose)
    gz_unit = gnd[..., 2] / np.linalg.norm(gnd, axis=-1)
    # the foot must lie strictly below the horizon
    valid = gz_unit < -eps_z
    with np.errstate(divide="ignore", invalid="ignore"):
        s = GROUND_Z / gnd[..., 2]
        xn = gnd[..., 0] * s
        yn = gnd[..., 1] * s
        hor = obj[..., 0] ** 2 + obj[..., 1] ** 2
        valid &= hor / np.einsum("...i,...i->...", obj, obj) > EPS_HORIZONTAL
        d = (obj[..., 0] * xn + obj[..., 1] * yn) / hor
    valid &= d > 0
    return UnprojectionPair(obj, gnd, np.stack([xn, yn], axis=-1), d, valid)


def _reconstruct(p, p_foot, intr, pose, eps_z=EPS_Z):
    pair = unprojection_pair(p, p_foot, intr, pose, eps_z)
    d = np.where(pair.valid, pair.depth_scale, np.nan)
    pts = d[..., None] * pair.object_dir
    feet = pts.copy()
    feet[..., 2] = GROUND_Z
    # zero height: the point is its own foot
    same = np.all(np.asarray(p, dtype=float) == np.asarray(p_foot, dtype=float), axis=-1)
    pts = np.where(same[..., None], feet, pts)
    return pts, feet, pair.valid


def reconstruct_point(p, p_foot, intr: CameraIntrinsics, pose, eps_z=EPS_Z):
    """World point for pixel ``p`` given its foot pixel, or ``None`` when invalid.

    Invalid means the foot pixel unprojects at or above the horizon
    (``|Z~| <= eps_z`` on the unit ray) or the object ray is nadir-degenerate.
    """
    pts, _, valid = _reconstruct(np.asarray(p, dtype=float)[None], np.asarray(p_foot, dtype=float)[None], intr, pose, eps_z)
    return pts[0] if valid[0] else None


@dataclass(frozen=True, eq=False)
class Reconstruction:
    front: PointCloud
    back: PointCloud
    feet: PointCloud
    intrinsics: CameraIntrinsics
    pose: CameraPose
    n_masked: int
    n_invalid_front: int
    n_invalid_back: int
    camera_cost: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def camera(self):
        return self.intrinsics, self.pose


def reconstruct_cloud(
    ph: PixelHeightMap,
    pf: Optional[PerspectiveField] = None,
    camera=None,
    mask=None,
    image: Optional[ScalarGrid] = None,
    grid=None,
    eps_z=EPS_Z,
    max_invalid_fraction=0.5,
) -> Reconstruction:
    """Reconstruct front, back and foot clouds for every masked pixel.

    Foot pixels follow the up vector of ``pf`` at each pixel (or the
    analytic up vector of ``camera`` when no field is given). Without
    ``camera`` the camera is recovered from ``pf`` by grid search followed
    by a continuous polish, unless ``grid`` says otherwise.
    """
    H, W = ph.shape
    if ph.normalized:
        ph = denormalize_heights(ph, H)
    if camera is None and pf is None:
        raise DomainError("need a perspective field, a camera, or both")
    cost = None
    if camera is None:
        from .camera_est import GridSpec, estimate_camera

        fov, pitch, roll, cost = estimate_camera(pf, None, grid or GridSpec(polish=True))
        camera = (CameraIntrinsics(fov, W, H), CameraPose(pitch, roll))
    intr, pose = camera
    if (intr.height, intr.width) != (H, W):
        raise DomainError("camera and pixel-height map differ in size")

    m = ph.mask.copy() if mask is None else (np.asarray(mask, dtype=bool) & ph.mask)
    px = pixel_centers(W, H)
    if pf is not None:
        if pf.shape != (H, W):
            raise DomainError("perspective field and pixel-height map differ in size")
        up = pf.up_vectors()
        up_ok = pf.valid
    else:
        _, up, up_ok = _latitude_and_up(px, intr, pose)

    idx = np.flatnonzero(m)
    p = px.reshape(-1, 2)[idx]
    u = up.reshape(-1, 2)[idx]
    uok = up_ok.reshape(-1)[idx]

    def one_surface(h_grid, h_valid):
        h = np.asarray(h_grid.values[0], dtype=float).reshape(-1)[idx]
        hv = h_valid.reshape(-1)[idx] & uok & (h >= 0)
        foot = p - np.where(hv, h, 0.0)[:, None] * np.where(hv[:, None], u, 0.0)
        pts, feet, ok = _reconstruct(p, foot, intr, pose, eps_z)
        return pts, feet, ok & hv

    f_pts, f_feet, f_ok = one_surface(ph.front, ph.front_valid)
    b_pts, _, b_ok = one_surface(ph.back, ph.back_valid)

    n_masked = idx.size
    n_bad = int(n_masked - f_ok.sum())
    diag = {"masked": n_masked, "invalid_front": n_bad, "invalid_back": int(n_masked - b_ok.sum())}
    if n_masked == 0 or n_bad > max_invalid_fraction * n_masked:
        raise ReconstructionError(
            f"{n_bad} of {n_masked} masked pixels failed to reconstruct", diagnostics=diag
        )
    if n_bad:
        log.info("skipped %d invalid front pixels", n_bad)

    colors = None
    if image is not None:
        rgb = np.asarray(image.values[:3], dtype=float).reshape(3, -1)[:, idx].T
        colors = rgb

    def cloud(pts, ok):
        return PointCloud(
            pts[ok], idx[ok], None if colors is None else colors[ok], image_shape=(H, W)
        )

    return Reconstruction(
        front=cloud(f_pts, f_ok),
        back=cloud(b_pts, b_ok),
        feet=cloud(f_feet, f_ok),
        intrinsics=intr,
        pose=pose,
        n_masked=n_masked,
        n_invalid_front=n_bad,
        n_invalid_back=diag["invalid_back"],
        camera_cost=cost,
        diagnostics=diag,
    )


def depth_from_reconstruction(front: PointCloud, camera, image_shape) -> ScalarGrid:
    """Camera-frame forward distance of each reconstructed point, on the image raster."""
    if front.pixels is None:
        raise DomainError("points need source-pixel indices to form a depth map")
    _, pose = camera
    H, W = image_shape
    z = world_to_camera(front.points, pose)[:, 2]
    depth = np.full(H * W, np.nan)
    ok = z > 0
    depth[front.pixels[ok]] = z[ok]
    valid = np.isfinite(depth).reshape(H, W)
    return ScalarGrid(depth.reshape(1, H, W), ("depth",), valid)
