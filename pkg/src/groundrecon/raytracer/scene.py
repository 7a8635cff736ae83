"""Scene description: primitives resting on the ground plane z = 0, lights and a look-at camera."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..core import CameraIntrinsics, CameraPose, rotation_matrix, yaw_matrix
from ..exceptions import DegenerateError, SceneError
from .primitives import Box, Cylinder, Sphere, TriangleMesh

_GROUND_TOL = 1e-9


@dataclass(frozen=True)
class DirectionalLight:
    """``direction`` is the direction light travels (pointing into the scene)."""

    direction: Tuple[float, float, float]
    intensity: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise SceneError("light direction must be non-zero")
        if abs(n - 1.0) > 1e-12:  # leave unit vectors bit-stable across round trips
            d = d / n
        object.__setattr__(self, "direction", tuple(float(x) for x in d))


@dataclass(frozen=True)
class PointLight:
    position: Tuple[float, float, float]
    intensity: float = 1.0


@dataclass(frozen=True)
class SceneCamera:
    position: Tuple[float, float, float]
    target: Tuple[float, float, float]
    intrinsics: CameraIntrinsics
    roll_deg: float = 0.0


def derive_pose_from_lookat(position, target, roll_deg=0.0) -> CameraPose:
    """Pitch of the look direction above the horizontal; azimuth is folded away."""
    return _lookat(position, target, roll_deg)[0]


def lookat_yaw(position, target):
    """Azimuth (degrees) that carries canonical +Y onto the horizontal look direction."""
    return _lookat(position, target, 0.0)[1]


def _lookat(position, target, roll_deg):
    v = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise DegenerateError("camera position equals target")
    v = v / n
    horiz = math.hypot(v[0], v[1])
    if horiz < 1e-9:
        raise DegenerateError("vertical look direction: pose is undefined")
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, v[2]))))
    yaw = math.degrees(math.atan2(-v[0], v[1]))
    return CameraPose(pitch, roll_deg), yaw


@dataclass(frozen=True, eq=False)
class Scene:
    primitives: List[object]
    camera: SceneCamera
    lights: List[object] = field(default_factory=list)
    ground_albedo: Tuple[float, float, float] = (0.7, 0.7, 0.7)
    ambient: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "primitives", list(self.primitives))
        object.__setattr__(self, "lights", list(self.lights))
        for prim in self.primitives:
            lo, _ = prim.bounds
            if lo[2] < -_GROUND_TOL:
                raise SceneError(f"{type(prim).__name__} extends below the ground plane")
        pos = np.asarray(self.camera.position, dtype=float)
        if not pos[2] > 0:
            raise SceneError("camera must be strictly above the ground")
        if self.primitives:
            lo, hi = self.bounds
            tgt = np.asarray(self.camera.target, dtype=float)
            if np.any(tgt < lo - 1e-9) or np.any(tgt > hi + 1e-9):
                raise SceneError("camera target lies outside the scene bounds")
        for light in self.lights:
            if isinstance(light, PointLight) and not light.position[2] > 0:
                raise SceneError("point light must be above the ground")

    @property
    def bounds(self):
        los, his = zip(*(p.bounds for p in self.primitives))
        return np.min(los, axis=0), np.max(his, axis=0)

    @property
    def bbox_diagonal(self):
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    @property
    def pose(self) -> CameraPose:
        return derive_pose_from_lookat(self.camera.position, self.camera.target, self.camera.roll_deg)

    @property
    def yaw_deg(self):
        return lookat_yaw(self.camera.position, self.camera.target)

    @property
    def rotation(self):
        """World-to-camera rotation acting on scene-frame directions."""
        return rotation_matrix(self.pose.pitch_deg, self.pose.roll_deg) @ yaw_matrix(self.yaw_deg).T

    def scaled(self, k):
        """Uniformly scaled copy (about the world origin); images are unchanged."""
        prims = []
        for p in self.primitives:
            if isinstance(p, Sphere):
                prims.append(Sphere(tuple(k * np.asarray(p.center)), k * p.radius, p.albedo))
            elif isinstance(p, Box):
                prims.append(Box(tuple(k * np.asarray(p.center)), tuple(k * np.asarray(p.half_extents)), p.yaw_deg, p.albedo))
            elif isinstance(p, Cylinder):
                prims.append(Cylinder(tuple(k * np.asarray(p.base_center)), k * p.radius, k * p.height, p.albedo))
            elif isinstance(p, TriangleMesh):
                prims.append(TriangleMesh(k * p.vertices, p.faces, p.albedo))
        lights = [
            PointLight(tuple(k * np.asarray(l.position)), l.intensity * k * k) if isinstance(l, PointLight) else l
            for l in self.lights
        ]
        cam = self.camera
        cam = SceneCamera(tuple(k * np.asarray(cam.position)), tuple(k * np.asarray(cam.target)), cam.intrinsics, cam.roll_deg)
        return Scene(prims, cam, lights, self.ground_albedo, self.ambient)

    # structured-text form (see groundrecon.io)
    def to_dict(self):
        cam = self.camera
        intr = cam.intrinsics
        return {
            "primitives": [_prim_to_dict(p) for p in self.primitives],
            "lights": [_light_to_dict(l) for l in self.lights],
            "ground_albedo": list(self.ground_albedo),
            "ambient": self.ambient,
            "camera": {
                "position": list(map(float, cam.position)),
                "target": list(map(float, cam.target)),
                "roll_deg": cam.roll_deg,
                "fov_deg": intr.fov_deg,
                "width": intr.width,
                "height": intr.height,
                "principal_point": list(intr.principal_point),
            },
        }

    @classmethod
    def from_dict(cls, data):
        try:
            c = data["camera"]
            intr = CameraIntrinsics(c["fov_deg"], c["width"], c["height"], c.get("principal_point"))
            cam = SceneCamera(tuple(c["position"]), tuple(c["target"]), intr, c.get("roll_deg", 0.0))
            prims = [_prim_from_dict(p) for p in data.get("primitives", [])]
            lights = [_light_from_dict(l) for l in data.get("lights", [])]
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene description: {exc!r}") from None
        return cls(prims, cam, lights, tuple(data.get("ground_albedo", (0.7, 0.7, 0.7))), data.get("ambient", 0.15))


def _prim_to_dict(p):
    if isinstance(p, Sphere):
        return {"type": "sphere", "center": list(p.center), "radius": p.radius, "albedo": list(p.albedo)}
    if isinstance(p, Box):
        return {
            "type": "box",
            "center": list(p.center),
            "half_extents": list(p.half_extents),
            "yaw_deg": p.yaw_deg,
            "albedo": list(p.albedo),
        }
    if isinstance(p, Cylinder):
        return {
            "type": "cylinder",
            "base_center": list(p.base_center),
            "radius": p.radius,
            "height": p.height,
            "albedo": list(p.albedo),
        }
    if isinstance(p, TriangleMesh):
        return {"type": "mesh", "vertices": p.vertices.tolist(), "faces": p.faces.tolist(), "albedo": list(p.albedo)}
    raise SceneError(f"unknown primitive {p!r}")


def _prim_from_dict(d):
    kind = d["type"]
    albedo = tuple(d.get("albedo", (0.8, 0.8, 0.8)))
    if kind == "sphere":
        return Sphere(tuple(d["center"]), d["radius"], albedo)
    if kind == "box":
        return Box(tuple(d["center"]), tuple(d["half_extents"]), d.get("yaw_deg", 0.0), albedo)
    if kind == "cylinder":
        return Cylinder(tuple(d["base_center"]), d["radius"], d["height"], albedo)
    if kind == "mesh":
        return TriangleMesh(d["vertices"], d["faces"], albedo)
    raise SceneError(f"unknown primitive type {kind!r}")


def _light_to_dict(l):
    if isinstance(l, DirectionalLight):
        return {"type": "directional", "direction": list(l.direction), "intensity": l.intensity}
    return {"type": "point", "position": list(l.position), "intensity": l.intensity}


def _light_from_dict(d):
    if d["type"] == "directional":
        return DirectionalLight(tuple(d["direction"]), d.get("intensity", 1.0))
    if d["type"] == "point":
        return PointLight(tuple(d["position"]), d.get("intensity", 1.0))
    raise SceneError(f"unknown light type {d['type']!r}")
