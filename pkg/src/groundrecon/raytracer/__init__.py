"""Primitive-scene ray tracer producing ground-truth fields."""
from .primitives import Box, Cylinder, Sphere, TriangleMesh
from .render import HitPair, RenderResult, ground_shadow_mask, intersect_first_last, render_ground_truth
from .scene import (
    DirectionalLight,
    PointLight,
    Scene,
    SceneCamera,
    derive_pose_from_lookat,
    lookat_yaw,
)

__all__ = [
    "Box",
    "Cylinder",
    "DirectionalLight",
    "HitPair",
    "PointLight",
    "RenderResult",
    "Scene",
    "SceneCamera",
    "Sphere",
    "TriangleMesh",
    "derive_pose_from_lookat",
    "ground_shadow_mask",
    "intersect_first_last",
    "lookat_yaw",
    "render_ground_truth",
]
