import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from groundrecon.core import CameraIntrinsics  # noqa: E402
from groundrecon.raytracer import Box, Cylinder, DirectionalLight, Scene, SceneCamera, Sphere, TriangleMesh  # noqa: E402


def orbit(center, dist, elevation_deg, azimuth_deg):
    el, az = math.radians(elevation_deg), math.radians(azimuth_deg)
    c = np.asarray(center, dtype=float)
    return tuple(c + dist * np.array([math.cos(el) * math.sin(az), -math.cos(el) * math.cos(az), math.sin(el)]))


def octahedron(center, r):
    cx, cy, cz = center
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float) * r + [cx, cy, cz]
    f = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return TriangleMesh(v, f)


def random_primitive(rng, kind):
    if kind == "sphere":
        r = rng.uniform(0.5, 1.5)
        return Sphere((rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), r), r)
    if kind == "box":
        h = rng.uniform(0.3, 1.0, size=3)
        return Box((0.0, 0.0, h[2]), tuple(h), rng.uniform(0, 90))
    if kind == "cylinder":
        return Cylinder((0.0, 0.0, 0.0), rng.uniform(0.3, 0.8), rng.uniform(0.5, 2.0))
    return octahedron((0.0, 0.0, 1.0), 1.0)


def random_scene(seed, size=512, kind=None):
    """A seeded single-primitive scene with a look-at camera that sees the ground contact."""
    rng = np.random.default_rng(seed)
    kind = kind or ("sphere", "box", "cylinder", "mesh")[seed % 4]
    prim = random_primitive(rng, kind)
    lo, hi = prim.bounds
    center = (lo + hi) / 2
    diag = float(np.linalg.norm(hi - lo))
    pos = orbit(center, rng.uniform(1.3, 2.2) * diag, rng.uniform(10, 50), rng.uniform(0, 360))
    intr = CameraIntrinsics(rng.uniform(35, 65), size, size)
    cam = SceneCamera(pos, tuple(center), intr, rng.uniform(-10, 10))
    return Scene([prim], cam, [DirectionalLight((0.3, 0.4, -0.85))])


@pytest.fixture
def sphere_scene():
    intr = CameraIntrinsics(50.0, 256, 256)
    return Scene([Sphere((0.0, 0.0, 1.0), 1.0)], SceneCamera((0.0, -6.0, 3.0), (0.0, 0.0, 1.0), intr, 0.0), [DirectionalLight((0.3, 0.5, -0.8))])
