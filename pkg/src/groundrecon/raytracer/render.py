"""Ground-truth rendering: RGB, depth, mask, front/back pixel heights, perspective field."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import CameraIntrinsics, CameraPose, ScalarGrid, pixel_centers
from ..fields import PerspectiveField, PixelHeightMap, render_perspective_field
from .scene import DirectionalLight, PointLight, Scene

SKY = np.array([0.55, 0.7, 0.9])
_SHADOW_BIAS = 1e-6


@dataclass(frozen=True)
class HitPair:
    """First entry / last exit of one ray against the scene objects."""

    t_first: float
    t_last: float
    first_point: np.ndarray
    last_point: np.ndarray
    first_primitive: int
    last_primitive: int


def _trace(primitives, o, d):
    n = o.shape[0]
    t_first = np.full(n, np.inf)
    t_last = np.full(n, -np.inf)
    first_id = np.full(n, -1)
    last_id = np.full(n, -1)
    normal = np.zeros((n, 3))
    for k, prim in enumerate(primitives):
        t_in, t_out, nrm = prim.interval(o, d)
        # only positive parameters count; a ray starting inside sees its exit first
        pos_out = t_out > 0
        t_in_pos = np.where(t_in > 0, t_in, t_out)
        t_in_pos = np.where(pos_out, t_in_pos, np.inf)
        closer = t_in_pos < t_first
        t_first = np.where(closer, t_in_pos, t_first)
        first_id = np.where(closer, k, first_id)
        normal[closer] = nrm[closer]
        farther = pos_out & (t_out > t_last)
        t_last = np.where(farther, t_out, t_last)
        last_id = np.where(farther, k, last_id)
    return t_first, t_last, first_id, last_id, normal


def intersect_first_last(origin, direction, scene: Scene) -> Optional[HitPair]:
    """First-entry / last-exit hit of one ray against the scene objects (ground excluded)."""
    o = np.asarray(origin, dtype=float).reshape(1, 3)
    d = np.asarray(direction, dtype=float).reshape(1, 3)
    d = d / np.linalg.norm(d)
    t0, t1, i0, i1, _ = _trace(scene.primitives, o, d)
    if not np.isfinite(t0[0]):
        return None
    return HitPair(float(t0[0]), float(t1[0]), o[0] + t0[0] * d[0], o[0] + t1[0] * d[0], int(i0[0]), int(i1[0]))


def _occluded(primitives, o, d, t_max):
    """True where any object blocks the segment ``o + t d, 0 < t < t_max``."""
    blocked = np.zeros(o.shape[0], dtype=bool)
    for prim in primitives:
        t_in, t_out, _ = prim.interval(o, d)
        blocked |= (t_out > _SHADOW_BIAS) & (t_in < t_max) & (t_in <= t_out)
    return blocked


def _light_dirs(light, points):
    """Unit direction toward the light, distance to it and the intensity falloff."""
    if isinstance(light, DirectionalLight):
        to_l = -np.asarray(light.direction, dtype=float)
        dirs = np.broadcast_to(to_l, points.shape).copy()
        return dirs, np.full(len(points), np.inf), np.full(len(points), light.intensity)
    v = np.asarray(light.position, dtype=float) - points
    dist = np.linalg.norm(v, axis=1)
    return v / dist[:, None], dist, light.intensity / dist**2


def _shade(scene, points, normals, albedo):
    light = np.full(len(points), scene.ambient)
    for src in scene.lights:
        dirs, dist, power = _light_dirs(src, points)
        lambert = np.clip(np.einsum("ij,ij->i", normals, dirs), 0.0, None)
        lit = lambert > 0
        origins = points + _SHADOW_BIAS * normals
        vis = np.ones(len(points), dtype=bool)
        if lit.any():
            vis[lit] = ~_occluded(scene.primitives, origins[lit], dirs[lit], dist[lit])
        light += power * lambert * vis
    return np.clip(albedo * light[:, None], 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class RenderResult:
    rgb: ScalarGrid
    depth: ScalarGrid
    mask: ScalarGrid
    pixel_height: PixelHeightMap
    perspective: PerspectiveField
    intrinsics: CameraIntrinsics
    pose: CameraPose
    yaw_deg: float
    camera_position: np.ndarray
    front_points: np.ndarray  # (H, W, 3) scene frame, nan off the object
    back_points: np.ndarray

    @property
    def camera(self):
        return self.intrinsics, self.pose

    @property
    def camera_height(self):
        return float(self.camera_position[2])

    def to_reconstruction_frame(self, points):
        """Scene-frame points -> camera-centered, yaw-folded frame with the ground at z = -1."""
        from ..core import yaw_matrix

        p = np.asarray(points, dtype=float) - self.camera_position
        return (p @ yaw_matrix(self.yaw_deg)) / self.camera_height


def _camera_rays(scene: Scene, pixels):
    intr = scene.camera.intrinsics
    f = intr.focal
    cx, cy = intr.principal_point
    cam = np.stack([(pixels[:, 0] - cx) / f, (pixels[:, 1] - cy) / f, np.ones(len(pixels))], axis=1)
    d = cam @ scene.rotation
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    o = np.broadcast_to(np.asarray(scene.camera.position, dtype=float), d.shape).copy()
    return o, d


def _project(scene: Scene, points):
    intr = scene.camera.intrinsics
    cam = (points - np.asarray(scene.camera.position, dtype=float)) @ scene.rotation.T
    f = intr.focal
    cx, cy = intr.principal_point
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.stack([f * cam[:, 0] / z + cx, f * cam[:, 1] / z + cy], axis=1)
    return px, z


def _radiance(scene, o, d):
    """Shaded color of each primary ray (objects, then ground, then sky)."""
    t0, _, i0, _, nrm = _trace(scene.primitives, o, d)
    hit = np.isfinite(t0)
    color = np.broadcast_to(SKY, o.shape).copy()
    if hit.any():
        pts = o[hit] + t0[hit, None] * d[hit]
        alb = np.array([scene.primitives[k].albedo for k in range(len(scene.primitives))], dtype=float)[i0[hit]]
        color[hit] = _shade(scene, pts, nrm[hit], alb)
    with np.errstate(divide="ignore", invalid="ignore"):
        tg = -o[:, 2] / d[:, 2]
    ground = ~hit & (d[:, 2] < 0)
    if ground.any():
        pts = o[ground] + tg[ground, None] * d[ground]
        up = np.tile([0.0, 0.0, 1.0], (int(ground.sum()), 1))
        color[ground] = _shade(scene, pts, up, np.asarray(scene.ground_albedo, dtype=float))
    return color


def render_ground_truth(scene: Scene, rgb_samples: int = 1, seed: int = 0) -> RenderResult:
    """Render the ground-truth bundle with one primary ray per pixel center.

    ``rgb_samples > 1`` supersamples the RGB image only, with seeded jitter;
    geometry channels always come from the pixel-center ray.
    """
    intr = scene.camera.intrinsics
    pose = scene.pose  # raises on degenerate look-at
    H, W = intr.height, intr.width
    px = pixel_centers(W, H).reshape(-1, 2)
    o, d = _camera_rays(scene, px)

    t0, t1, _, _, _ = _trace(scene.primitives, o, d)
    hit = np.isfinite(t0)
    front = np.full((H * W, 3), np.nan)
    back = np.full((H * W, 3), np.nan)
    front[hit] = o[hit] + t0[hit, None] * d[hit]
    back[hit] = o[hit] + t1[hit, None] * d[hit]

    def heights(points):
        h = np.full(H * W, np.nan)
        if hit.any():
            p = points[hit]
            foot = p.copy()
            foot[:, 2] = 0.0
            pp, zp = _project(scene, p)
            pf, zf = _project(scene, foot)
            ok = (zp > 0) & (zf > 0)
            h[hit] = np.where(ok, np.linalg.norm(pp - pf, axis=1), np.nan)
        return h.reshape(H, W)

    h_front = heights(front)
    h_back = heights(back)

    forward = scene.rotation[2]
    depth = np.full(H * W, np.nan)
    depth[hit] = (front[hit] - o[hit]) @ forward
    mask = hit.reshape(H, W)

    if rgb_samples <= 1:
        rgb = _radiance(scene, o, d)
    else:
        rng = np.random.default_rng(seed)
        acc = np.zeros((H * W, 3))
        for _ in range(rgb_samples):
            jit = px + rng.uniform(-0.5, 0.5, size=px.shape)
            acc += _radiance(scene, *_camera_rays(scene, jit))
        rgb = acc / rgb_samples

    return RenderResult(
        rgb=ScalarGrid(rgb.T.reshape(3, H, W), ("red", "green", "blue")),
        depth=ScalarGrid(depth.reshape(1, H, W), ("depth",), mask),
        mask=ScalarGrid(mask[None].astype(np.float32), ("mask",)),
        pixel_height=PixelHeightMap.from_arrays(h_front, h_back, mask),
        perspective=render_perspective_field(intr, pose),
        intrinsics=intr,
        pose=pose,
        yaw_deg=scene.yaw_deg,
        camera_position=np.asarray(scene.camera.position, dtype=float),
        front_points=front.reshape(H, W, 3),
        back_points=back.reshape(H, W, 3),
    )


def ground_shadow_mask(scene: Scene, light):
    """Shadow-ray occlusion of the visible ground.

    Returns ``(shadow, ground)``: ``ground`` marks pixels whose primary ray
    reaches the ground plane without touching an object, ``shadow`` those of
    them from which ``light`` is blocked by an object.
    """
    intr = scene.camera.intrinsics
    H, W = intr.height, intr.width
    o, d = _camera_rays(scene, pixel_centers(W, H).reshape(-1, 2))
    t0, _, _, _, _ = _trace(scene.primitives, o, d)
    ground = ~np.isfinite(t0) & (d[:, 2] < 0)
    shadow = np.zeros(H * W, dtype=bool)
    if ground.any():
        pts = o[ground] + (-o[ground, 2] / d[ground, 2])[:, None] * d[ground]
        pts[:, 2] = 0.0
        dirs, dist, _ = _light_dirs(light, pts)
        shadow[ground] = _occluded(scene.primitives, pts + _SHADOW_BIAS * np.array([0, 0, 1.0]), dirs, dist)
    return shadow.reshape(H, W), ground.reshape(H, W)
