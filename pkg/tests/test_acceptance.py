"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line."""
import math
import os
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

import oracles
from conftest import random_scene
from groundrecon import io
from groundrecon.camera_est import estimate_camera
from groundrecon.core import CameraIntrinsics, CameraPose, GroundPlane, PointCloud, ScalarGrid, project, yaw_matrix
from groundrecon.fields import PerspectiveField, PixelHeightMap, latitude_at, render_perspective_field, up_vector_at
from groundrecon.metrics import (
    absrel_delta1,
    align_scale_shift,
    chamfer_distance,
    evaluate_sample,
    lsiv,
)
from groundrecon.raytracer import (
    Box,
    Cylinder,
    DirectionalLight,
    Scene,
    SceneCamera,
    Sphere,
    ground_shadow_mask,
    render_ground_truth,
)
from groundrecon.relight import LightSpec, cast_shadow, fill_between, shadow_points
from groundrecon.reproject import foot_pixel, reconstruct_cloud

GROUND = GroundPlane(-1.0)


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def test_1_round_trip_reconstruction(report):
    t0 = time.perf_counter()
    worst, feet_var = 0.0, 0.0
    for seed in range(20):
        scene = random_scene(seed, size=512)
        r = render_ground_truth(scene)
        # field-only input: the camera is recovered from the perspective field
        rec = reconstruct_cloud(r.pixel_height, r.perspective)
        m = r.pixel_height.mask
        diag = scene.bbox_diagonal / r.camera_height  # diagonal in the reconstruction frame
        for pred, gt in ((rec.front, r.front_points[m]), (rec.back, r.back_points[m])):
            d = cKDTree(r.to_reconstruction_frame(gt)).query(pred.points)[0].mean()
            worst = max(worst, d / diag)
        feet_var = max(feet_var, float(np.var(rec.feet.points[:, 2])))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-3 and feet_var == 0.0 and elapsed < 60
    report(1, "round-trip reconstruction", ok,
           f"worst mean NN / diag = {worst:.2e}, feet z-variance = {feet_var}, {elapsed:.1f} s for 20 scenes")


def test_2_camera_recovery(report):
    rng = np.random.default_rng(2024)
    W, H = 160, 120
    clean_err, noisy_err = [], []
    for _ in range(50):
        cam = np.array([rng.uniform(25, 75), rng.uniform(-60, 20), rng.uniform(-20, 20)])
        pf = render_perspective_field(CameraIntrinsics(cam[0], W, H), CameraPose(cam[1], cam[2]))
        clean_err.append(np.abs(np.array(estimate_camera(pf)[:3]) - cam))
        t = pf.up_angle() + rng.normal(0.0, math.radians(2.0), size=(H, W))
        noisy = PerspectiveField(pf.latitude, ScalarGrid(np.stack([np.sin(t), np.cos(t)]), ("up_sin", "up_cos")))
        noisy_err.append(np.abs(np.array(estimate_camera(noisy)[:3]) - cam))
    clean_err, noisy_err = np.array(clean_err), np.array(noisy_err)
    med = np.median(noisy_err, axis=0)
    ok = clean_err.max() <= 0.25 and med[1] < 2 and med[2] < 2 and med[0] < 4
    report(2, "camera recovery", ok,
           f"noiseless max |err| (fov, pitch, roll) = {np.round(clean_err.max(0), 4).tolist()} deg; "
           f"2 deg noise median = {np.round(med, 4).tolist()} deg")


def test_3_reprojection_constraints(report):
    rng = np.random.default_rng(3)
    H, W = 250, 400  # 1e5 pixels
    intr, pose = CameraIntrinsics(60.0, W, H), CameraPose(-35.0, 7.0)
    h = rng.uniform(0, 60, size=(H, W))
    ph = PixelHeightMap.from_arrays(h, h + rng.uniform(0, 30, size=(H, W)), np.ones((H, W), bool))
    rec = reconstruct_cloud(ph, render_perspective_field(intr, pose), camera=(intr, pose), max_invalid_fraction=0.9)
    P, F = rec.front.points, rec.feet.points
    xy_rel = float((np.abs(P[:, :2] - F[:, :2]) / np.maximum(np.abs(F[:, :2]), 1e-300)).max())
    feet_exact = bool(np.all(F[:, 2] == -1.0))

    scene = random_scene(3, size=256)
    a, b = render_ground_truth(scene), render_ground_truth(scene.scaled(3.0))
    ra, rb = reconstruct_cloud(a.pixel_height, a.perspective), reconstruct_cloud(b.pixel_height, b.perspective)
    same_px = np.array_equal(ra.front.pixels, rb.front.pixels)
    scale_diff = float(np.abs(ra.front.points - rb.front.points).max()) if same_px else math.inf
    ok = len(P) >= 0.5 * H * W and xy_rel < 1e-9 and feet_exact and scale_diff < 1e-9
    report(3, "reprojection constraints", ok,
           f"{len(P)} valid pixels, max (x, y) relative gap = {xy_rel:.1e}, feet on z = -1: {feet_exact}, "
           f"3x scene max difference = {scale_diff:.1e}")


def test_4_fields_vs_numeric(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        intr = CameraIntrinsics(rng.uniform(20, 120), 640, 480)
        pitch, roll = rng.uniform(-80, 80), rng.uniform(-60, 60)
        basis = oracles.camera_basis(pitch, roll)
        px = rng.uniform(0, 1, size=(100, 2)) * [640, 480]
        up = up_vector_at(px, intr, CameraPose(pitch, roll))
        for p, a in zip(px, up):
            b = oracles.fd_up_vector(p, intr.focal, intr.principal_point, basis)
            worst = max(worst, math.degrees(math.acos(min(1.0, float(a @ b)))))
    lat_err = 0.0
    for pitch in np.linspace(-85, 85, 35):
        intr = CameraIntrinsics(rng.uniform(20, 120), 640, 480)
        lat = latitude_at(intr.principal_point, intr, CameraPose(pitch, rng.uniform(-60, 60)))
        lat_err = max(lat_err, abs(float(lat) - math.radians(pitch)))
    ok = worst < 0.1 and lat_err < 1e-9
    report(4, "analytic vs numeric fields", ok,
           f"10^4 samples, max up-vector angle = {worst:.2e} deg; principal latitude error = {lat_err:.1e} rad")


def test_5_metric_identities(report):
    rng = np.random.default_rng(5)
    gt = rng.uniform(1, 10, size=(48, 64))
    pts = rng.normal(size=(400, 3))
    fields = (
        PixelHeightMap.from_arrays(gt, gt + 1, np.ones(gt.shape, bool)),
        render_perspective_field(CameraIntrinsics(60, 64, 48), CameraPose(-20, 4)),
    )
    r = evaluate_sample(gt, gt, None, PointCloud(pts), PointCloud(pts), fields, fields)
    self_ok = (r.absrel, r.delta1, r.chamfer, r.lsiv, r.pixel_height_l1, r.latitude_l1, r.up_l1) == (
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    pred = gt * rng.uniform(0.95, 1.05, size=gt.shape)
    base = absrel_delta1(align_scale_shift(pred, gt)[2], gt)[0]
    affine = max(abs(absrel_delta1(align_scale_shift(a * pred + b, gt)[2], gt)[0] - base)
                 for a, b in ((3.0, 0.2), (0.01, -4.0), (250.0, 17.0)))
    exact = absrel_delta1(align_scale_shift(3 * gt + 0.2, gt)[2], gt)[0]

    noisy = pts + rng.normal(0, 0.1, pts.shape)
    ref = lsiv(noisy, pts)
    lsiv_var = max(abs(lsiv(k * noisy, pts) - ref) for k in (1e-3, 0.5, 7.0, 1e3))

    a, b = [[0, 0, 0], [2, 0, 0]], [[1, 0, 0]]
    cd = chamfer_distance(a, b)
    ok = self_ok and exact < 1e-9 and affine < 1e-9 and lsiv_var < 1e-12 and cd == oracles.brute_chamfer(a, b) == 1.0
    report(5, "metric identities", ok,
           f"self-evaluation exact: {self_ok}; affine AbsRel residual = {max(exact, affine):.1e}; "
           f"LSIV scale drift = {lsiv_var:.1e}; 3-point CD = {cd}")


def _shadow_scenes():
    rng = np.random.default_rng(7)
    for k in range(5):
        prim = Sphere((0, 0, 1.0), 1.0) if k % 2 == 0 else Box((0, 0, 0.6), (0.6, 0.8, 0.6), rng.uniform(0, 90))
        dist, el, az = rng.uniform(5, 8), math.radians(rng.uniform(15, 45)), math.radians(rng.uniform(0, 360))
        pos = dist * np.array([math.cos(el) * math.sin(az), -math.cos(el) * math.cos(az), math.sin(el)])
        light_el, turn = math.radians(rng.uniform(40, 65)), math.radians(rng.uniform(-70, 70))
        # horizontal travel: away from the camera, turned by up to 70 degrees
        hdir = pos[:2] / np.linalg.norm(pos[:2])
        c, s = math.cos(turn), math.sin(turn)
        hdir = np.array([c * hdir[0] - s * hdir[1], s * hdir[0] + c * hdir[1]])
        d = np.array([math.cos(light_el) * hdir[0], math.cos(light_el) * hdir[1], -math.sin(light_el)])
        lo, hi = prim.bounds
        cam = SceneCamera(tuple(pos), tuple((lo + hi) / 2), CameraIntrinsics(50, 512, 512), 0.0)
        yield Scene([prim], cam, [DirectionalLight(tuple(d))]), d


def test_6_shadow_oracle(report):
    ious = []
    for scene, d in _shadow_scenes():
        r = render_ground_truth(scene)
        rec = reconstruct_cloud(r.pixel_height, r.perspective)
        light = LightSpec.directional(d @ yaw_matrix(r.yaw_deg))
        sh = cast_shadow(fill_between(rec.front, rec.back, 16), GROUND, light, rec.camera, (512, 512)).values[0]
        gt, ground = ground_shadow_mask(scene, DirectionalLight(tuple(d)))
        pred = (sh > 0) & ground
        ious.append((pred & gt).sum() / (pred | gt).sum())

    # contact: feet lie on the ground, so their shadows fall on their own foot pixels
    r = render_ground_truth(random_scene(1, size=256))
    rec = reconstruct_cloud(r.pixel_height, r.perspective, camera=r.camera)
    light = LightSpec.from_elevation(50, 30)
    S, _ = shadow_points(rec.feet.points, GROUND, light)
    src = rec.feet.pixels
    W = r.pixel_height.shape[1]
    p = np.column_stack([src % W + 0.5, src // W + 0.5])
    h = r.pixel_height.front.values[0].reshape(-1)[src].astype(float)
    up = r.perspective.up_vectors().reshape(-1, 2)[src]
    contact = float(np.abs(project(S, *rec.camera)[0] - foot_pixel(p, h, up)).max())

    # 45 degree light: a pole of height h casts a shadow of length h (plus its radius)
    hgt, rad = 1.0, 0.015
    pole = Scene([Cylinder((0, 0, 0), rad, hgt)], SceneCamera((1.5, -4.0, 2.0), (0, 0, 0.4), CameraIntrinsics(40, 512, 512)))
    r = render_ground_truth(pole)
    rec = reconstruct_cloud(r.pixel_height, r.perspective)
    u = np.array([math.sin(math.radians(60)), math.cos(math.radians(60)), 0.0])
    d = (u - [0, 0, 1]) / math.sqrt(2)
    sh = cast_shadow(fill_between(rec.front, rec.back, 16), GROUND, LightSpec.directional(d @ yaw_matrix(r.yaw_deg)),
                     rec.camera, (512, 512)).values[0]

    def pix(P):
        return project(r.to_reconstruction_frame(np.atleast_2d(P)), *rec.camera)[0][0]

    base, tip = pix([0.0, 0.0, 0.0]), pix(u * (hgt + rad))
    v = (tip - base) / np.linalg.norm(tip - base)
    ii, jj = np.nonzero(sh > 0.5)
    q = np.column_stack([jj + 0.5, ii + 0.5]) - base
    along = q @ v
    near_axis = np.abs(q @ [-v[1], v[0]]) < 3
    pole_gap = abs(float(along[near_axis].max()) - float(np.linalg.norm(tip - base)))

    ok = min(ious) > 0.9 and contact <= 1.0 and pole_gap <= 1.0
    report(6, "shadow oracle", ok,
           f"IoU per scene = {[round(float(x), 3) for x in ious]}; contact offset = {contact:.1e} px; "
           f"45 deg pole tip offset = {pole_gap:.2f} px")


SPHERE = [{"type": "sphere", "center": [0, 0, 1], "radius": 1}]
BOX = [{"type": "box", "center": [0, 0, 0.5], "half_extents": [0.5, 0.4, 0.5], "yaw_deg": 20}]
TINY = [{"type": "sphere", "center": [0, 0, 0.05], "radius": 0.05}]


def _tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            path = os.path.join(dirpath, f)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_7_dataset(report, tmp_path):
    spec = io.DatasetSpec(scenes=(SPHERE, BOX), width=64, height=64, seed=11)
    m1 = io.generate_dataset(spec, tmp_path / "a")
    io.generate_dataset(spec, tmp_path / "b")
    io.generate_dataset(spec, tmp_path / "c", workers=3)
    a, b, c = (_tree_bytes(tmp_path / x) for x in "abc")
    identical = a == b == c
    tiny = io.generate_dataset(io.DatasetSpec(scenes=(TINY,), samples_per_scene=2, width=64, height=64,
                                              distance_range=(12.0, 15.0)), tmp_path / "t")
    reasons = {e["reason"] for e in tiny["entries"]}
    rejected = tiny["rejected"] == 2 and reasons == {"mask coverage below threshold"}
    default = io.DatasetSpec().samples_per_scene
    ok = identical and rejected and default == 6 and len(m1["entries"]) == 12
    report(7, "dataset determinism and filtering", ok,
           f"byte-identical across runs and worker counts: {identical} ({len(a)} files); "
           f"tiny sphere rejected as {sorted(reasons)}; default samples per scene = {default}")


def test_8_format_round_trips(report, tmp_path):
    rng = np.random.default_rng(8)
    grids_ok = cams_ok = True
    for k in range(100):
        C, H, W = (int(x) for x in rng.integers(1, 9, size=3))
        v = rng.normal(size=(C, H, W)).astype(np.float32) * np.float32(10 ** rng.uniform(-5, 5))
        g = ScalarGrid(v, tuple(f"c{k}_{j}" for j in range(C)))
        io.write_grid(tmp_path / "g.orgf", g)
        back = io.read_grid(tmp_path / "g.orgf")
        raw = (tmp_path / "g.orgf").read_bytes()
        _, _, names, vals = oracles.read_orgf(raw)
        grids_ok &= back.values.tobytes() == g.values.tobytes() == vals.tobytes() and back.channels == g.channels
        grids_ok &= tuple(names) == g.channels

        cam = (CameraIntrinsics(rng.uniform(10, 150), W * 10, H * 10, tuple(rng.uniform(0, 10, 2))),
               CameraPose(rng.uniform(-90, 90), rng.uniform(-180, 180)))
        io.write_camera(tmp_path / "c.json", cam)
        cams_ok &= io.read_camera(tmp_path / "c.json") == cam

    pts = rng.normal(size=(50, 3)) * 1e3
    cols = rng.integers(0, 256, size=(50, 3)).astype(np.uint8)
    io.write_ply(tmp_path / "p.ply", PointCloud(pts, colors=cols))
    names, rows = oracles.parse_ply((tmp_path / "p.ply").read_text())
    rows = np.array(rows)
    ply_ok = names == ["x", "y", "z", "red", "green", "blue"] and np.array_equal(rows[:, :3], pts)
    ply_ok &= np.array_equal(rows[:, 3:], cols)
    ok = bool(grids_ok and cams_ok and ply_ok)
    report(8, "format round trips", ok,
           f"100 grids bit-exact: {bool(grids_ok)}; 100 camera files exact: {bool(cams_ok)}; "
           f"PLY parsed by independent reader: {bool(ply_ok)}")
