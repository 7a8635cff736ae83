import math

import numpy as np
import pytest

import oracles
from conftest import octahedron, random_scene
from groundrecon.core import CameraIntrinsics
from groundrecon.exceptions import DegenerateError, SceneError
from groundrecon.raytracer import (
    Box,
    Cylinder,
    DirectionalLight,
    PointLight,
    Scene,
    SceneCamera,
    Sphere,
    TriangleMesh,
    derive_pose_from_lookat,
    ground_shadow_mask,
    intersect_first_last,
    render_ground_truth,
)


def _scene(prims, pos=(0.0, -6.0, 3.0), target=(0.0, 0.0, 0.5), size=64, lights=()):
    return Scene(prims, SceneCamera(pos, target, CameraIntrinsics(50.0, size, size)), list(lights))


class TestIntersect:
    def test_axial_sphere(self):
        s = _scene([Sphere((0, 5, 1), 1)], target=(0, 5, 1))
        hit = intersect_first_last((0, 0, 1), (0, 1, 0), s)
        assert hit.t_first == pytest.approx(4.0, abs=1e-12)
        assert hit.t_last == pytest.approx(6.0, abs=1e-12)
        np.testing.assert_allclose(hit.first_point, [0, 4, 1], atol=1e-12)

    def test_miss(self):
        s = _scene([Sphere((0, 5, 10), 1)], target=(0, 5, 10))
        assert intersect_first_last((0, 0, 1), (0, 1, 0), s) is None

    def test_tangent(self):
        s = _scene([Sphere((0, 5, 1), 1)], target=(0, 5, 1))
        hit = intersect_first_last((1, 0, 1), (0, 1, 0), s)
        assert hit is not None
        assert hit.t_last - hit.t_first < 1e-6

    def test_first_entry_last_exit_across_objects(self):
        s = _scene([Sphere((0, 5, 1), 1), Sphere((0, 9, 1), 1)], target=(0, 5, 1))
        hit = intersect_first_last((0, 0, 1), (0, 1, 0), s)
        assert (hit.t_first, hit.t_last) == pytest.approx((4.0, 10.0))
        assert (hit.first_primitive, hit.last_primitive) == (0, 1)

    def test_box_and_cylinder(self):
        s = _scene([Box((0, 5, 1), (1, 1, 1), 0.0)], target=(0, 5, 1))
        assert intersect_first_last((0, 0, 1), (0, 1, 0), s).t_first == pytest.approx(4.0)
        s = _scene([Box((0, 5, 1), (1, 1, 1), 45.0)], target=(0, 5, 1))
        assert intersect_first_last((0, 0, 1), (0, 1, 0), s).t_first == pytest.approx(5 - math.sqrt(2))
        s = _scene([Cylinder((0, 5, 0), 1, 2)], target=(0, 5, 1))
        hit = intersect_first_last((0, 0, 1), (0, 1, 0), s)
        assert (hit.t_first, hit.t_last) == pytest.approx((4.0, 6.0))
        hit = intersect_first_last((0, 5, 5), (0, 0, -1), s)
        assert (hit.t_first, hit.t_last) == pytest.approx((3.0, 5.0))

    def test_mesh_bvh_matches_brute_force(self):
        rng = np.random.default_rng(0)
        mesh = octahedron((0, 0, 1), 1)
        tris = mesh.vertices[mesh.faces]
        o = rng.normal(size=(500, 3)) * 0.3 + [0, -5, 1]
        d = rng.normal(size=(500, 3)) * 0.15 + [0, 1, 0]
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        t_in, t_out, _ = mesh.interval(o, d)
        brute = np.stack([_mt(o, d, tri) for tri in tris], axis=1)
        ok = np.isfinite(brute)
        first = np.where(ok, brute, np.inf).min(axis=1)
        last = np.where(ok, brute, -np.inf).max(axis=1)
        hit = ok.any(axis=1)
        assert hit.sum() > 50
        np.testing.assert_allclose(t_in[hit], first[hit], atol=1e-9)
        np.testing.assert_allclose(t_out[hit], last[hit], atol=1e-9)
        assert np.all(~np.isfinite(t_in[~hit]))


def _mt(o, d, tri):
    """Textbook Moller-Trumbore per ray, nan on a miss."""
    v0, v1, v2 = tri
    out = np.full(len(o), np.nan)
    e1, e2 = v1 - v0, v2 - v0
    for k in range(len(o)):
        p = np.cross(d[k], e2)
        det = e1 @ p
        if abs(det) < 1e-14:
            continue
        s = o[k] - v0
        u = (s @ p) / det
        q = np.cross(s, e1)
        v = (d[k] @ q) / det
        t = (e2 @ q) / det
        if u >= 0 and v >= 0 and u + v <= 1 and t > 0:
            out[k] = t
    return out


class TestPose:
    def test_look_down_45(self):
        assert derive_pose_from_lookat((0, -5, 5), (0, 0, 0)).pitch_deg == pytest.approx(-45.0)

    def test_level(self):
        assert derive_pose_from_lookat((0, -5, 0.0), (0, 0, 0)).pitch_deg == 0.0

    def test_nadir(self):
        with pytest.raises(DegenerateError):
            derive_pose_from_lookat((0, 0, 5), (0, 0, 0))


class TestSceneValidation:
    def test_below_ground(self):
        with pytest.raises(SceneError):
            _scene([Sphere((0, 0, 0.5), 1)])

    def test_camera_below_ground(self):
        with pytest.raises(SceneError):
            _scene([Sphere((0, 0, 1), 1)], pos=(0, -5, -1), target=(0, 0, 1))

    def test_target_outside(self):
        with pytest.raises(SceneError):
            _scene([Sphere((0, 0, 1), 1)], target=(5, 5, 5))

    def test_dict_round_trip(self):
        s = _scene([Sphere((0, 0, 1), 1), Box((2, 0, 0.5), (0.5, 0.5, 0.5), 10), Cylinder((-2, 0, 0), 0.5, 1), octahedron((0, 3, 1), 1)],
                   lights=[DirectionalLight((0, 0.3, -1)), PointLight((1, 2, 5), 3.0)])
        t = Scene.from_dict(s.to_dict())
        assert t.to_dict() == s.to_dict()


class TestRender:
    def test_contact_height(self):
        # the visible bottom edge of a box sits on the ground
        s = _scene([Box((0, 0, 0.5), (0.5, 0.5, 0.5), 20.0)], pos=(0, -6, 3), target=(0, 0, 0.5), size=256)
        r = render_ground_truth(s)
        h = r.pixel_height.front.values[0][r.pixel_height.mask]
        assert h.min() < 0.75

    def test_pole_top_height(self):
        pole = Cylinder((0, 0, 0), 0.02, 1.0)
        s = Scene([pole], SceneCamera((0, -5, 0.5), (0, 0, 0.5), CameraIntrinsics(30, 256, 256)))
        r = render_ground_truth(s)
        mask = r.pixel_height.mask
        col = 128
        top = np.flatnonzero(mask[:, col])[0]
        f = s.camera.intrinsics.focal
        length = f * 1.0 / 4.98  # endpoints at the front of the pole
        assert abs(r.pixel_height.front.values[0, top, col] - length) < 1.0

    def test_sphere_silhouette_area(self):
        s = _scene([Sphere((0.3, 0.2, 1), 1)], pos=(1.0, -5.0, 2.5), target=(0.0, 0.0, 0.5), size=512)
        r = render_ground_truth(s)
        center_cam = s.rotation @ (np.array([0.3, 0.2, 1]) - s.camera.position)
        area = oracles.sphere_silhouette_area(center_cam, 1.0, s.camera.intrinsics.focal)
        assert abs(r.pixel_height.mask.sum() / area - 1) < 0.02

    def test_back_height_defined_on_mask(self, sphere_scene):
        r = render_ground_truth(sphere_scene)
        assert np.array_equal(r.pixel_height.back_valid, r.pixel_height.mask)

    def test_heights_reproject(self, sphere_scene):
        r = render_ground_truth(sphere_scene)
        s = sphere_scene
        basis = oracles.camera_basis(s.pose.pitch_deg, s.pose.roll_deg)
        from groundrecon.core import yaw_matrix

        m = r.pixel_height.mask
        P = r.front_points[m]
        F = P.copy()
        F[:, 2] = 0
        rot = basis @ yaw_matrix(s.yaw_deg).T
        cam = np.asarray(s.camera.position)
        intr = s.camera.intrinsics
        h = np.linalg.norm(
            oracles.project(P - cam, intr.focal, intr.principal_point, rot)
            - oracles.project(F - cam, intr.focal, intr.principal_point, rot),
            axis=1,
        )
        # heights are stored as float32
        np.testing.assert_allclose(r.pixel_height.front.values[0][m], h, rtol=1e-6, atol=1e-4)

    def test_depth_positive_and_deterministic(self, sphere_scene):
        a = render_ground_truth(sphere_scene, rgb_samples=4, seed=3)
        b = render_ground_truth(sphere_scene, rgb_samples=4, seed=3)
        assert a.rgb == b.rgb and a.depth == b.depth
        assert np.all(a.depth.values[0][a.pixel_height.mask] > 0)

    def test_scaled_scene_same_images(self):
        s = random_scene(5, size=96)
        a, b = render_ground_truth(s), render_ground_truth(s.scaled(3.0))
        assert np.array_equal(a.pixel_height.mask, b.pixel_height.mask)
        np.testing.assert_allclose(a.pixel_height.front.values, b.pixel_height.front.values, rtol=1e-5, atol=1e-4)

    def test_shadow_mask(self):
        s = _scene([Box((0, 0, 1), (0.5, 0.5, 1), 0)], pos=(0, -8, 6), target=(0, 0, 1), size=128)
        shadow, ground = ground_shadow_mask(s, DirectionalLight((0, 0, -1)))
        # overhead light: shadow directly under the box, hidden by the box itself
        assert not (shadow & ground).any()
        shadow, ground = ground_shadow_mask(s, DirectionalLight((0, -1, -1)))
        assert (shadow & ground).sum() > 20
