"""Independent reference implementations used only by the tests.

None of these call into the package's geometry: the camera basis is built
from look-direction vectors, up vectors come from finite differences of a
projection, nearest neighbours are brute force, and file readers are
written against the format description.
"""
import math
import struct

import numpy as np


def camera_basis(pitch_deg, roll_deg):
    """Rows: camera right, down and forward axes expressed in the world frame."""
    p, r = math.radians(pitch_deg), math.radians(roll_deg)
    fwd = np.array([0.0, math.cos(p), math.sin(p)])
    right0 = np.array([1.0, 0.0, 0.0])
    down0 = np.array([0.0, math.sin(p), -math.cos(p)])
    # counter-clockwise body roll seen from behind the camera
    right = math.cos(r) * right0 - math.sin(r) * down0
    down = math.cos(r) * down0 + math.sin(r) * right0
    return np.stack([right, down, fwd])


def focal(fov_deg, height):
    return height / (2.0 * math.tan(math.radians(fov_deg) / 2.0))


def project(points, f, c, basis):
    cam = np.asarray(points, dtype=float) @ basis.T
    return np.stack([f * cam[..., 0] / cam[..., 2] + c[0], f * cam[..., 1] / cam[..., 2] + c[1]], axis=-1)


def ray(pixel, f, c, basis):
    x, y = pixel
    d = ((x - c[0]) / f) * basis[0] + ((y - c[1]) / f) * basis[1] + basis[2]
    return d / np.linalg.norm(d)


def fd_up_vector(pixel, f, c, basis, eps=1e-6):
    """Image direction of world up at ``pixel`` by central differences of the projection."""
    r = ray(pixel, f, c, basis)
    z = np.array([0.0, 0.0, 1.0])
    d = project(r + eps * z, f, c, basis) - project(r - eps * z, f, c, basis)
    return d / np.linalg.norm(d)


def ground_reconstruct(p, p_foot, f, c, basis, ground=-1.0):
    """Foot ray meets z = ground; the object point is the point of the object ray
    whose horizontal position best matches the foot (1-D least squares)."""
    g = ray(p_foot, f, c, basis)
    foot = g * (ground / g[2])
    o = ray(p, f, c, basis)
    A = o[:2].reshape(2, 1)
    d, *_ = np.linalg.lstsq(A, foot[:2], rcond=None)
    return d[0] * o, foot


def brute_chamfer(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    D = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return 0.5 * (D.min(axis=1).mean() + D.min(axis=0).mean())


def brute_nn(query, ref, chunk=2048):
    ref = np.asarray(ref, float)
    out = []
    for k in range(0, len(query), chunk):
        q = np.asarray(query[k : k + chunk], float)
        out.append(np.sqrt(((q[:, None, :] - ref[None]) ** 2).sum(-1)).min(axis=1))
    return np.concatenate(out)


def scan_lsiv(pred, gt, lo=0.01, hi=10.0, n=20001, rounds=6):
    """Minimum RMSE over a dense grid of scales, zooming in around the best one."""
    pred, gt = np.asarray(pred, float), np.asarray(gt, float)
    best = None
    for _ in range(rounds):
        s = np.linspace(lo, hi, n)
        r = np.array([math.sqrt(((k * pred - gt) ** 2).sum(1).mean()) for k in s])
        i = int(r.argmin())
        best = r[i]
        step = s[1] - s[0]
        lo, hi = s[i] - 2 * step, s[i] + 2 * step
    return best


def sphere_silhouette_area(center_cam, radius, f):
    """Area in square pixels of the perspective image of a sphere (an ellipse)."""
    D = np.linalg.norm(center_cam)
    sa = radius / D
    ca = math.sqrt(1 - sa * sa)
    cb = center_cam[2] / D
    return math.pi * f * f * sa * sa * ca / (cb * cb - sa * sa) ** 1.5


def read_orgf(data):
    """Field-by-field reader for the grid format."""
    magic = data[0:4]
    version = struct.unpack("<H", data[4:6])[0]
    channels = struct.unpack("<H", data[6:8])[0]
    width = struct.unpack("<I", data[8:12])[0]
    height = struct.unpack("<I", data[12:16])[0]
    names = [data[16 + 32 * k : 48 + 32 * k].split(b"\0")[0].decode("ascii") for k in range(channels)]
    off = 16 + 32 * channels
    n = channels * width * height
    vals = struct.unpack(f"<{n}f", data[off : off + 4 * n])
    return magic, version, names, np.array(vals, dtype=np.float32).reshape(channels, height, width)


def parse_ply(text):
    """Minimal ASCII PLY parser: returns the vertex property names and rows."""
    lines = text.split("\n")
    assert lines[0] == "ply"
    assert lines[1] == "format ascii 1.0"
    i, count, props = 2, None, []
    while lines[i] != "end_header":
        tok = lines[i].split()
        if tok[0] == "element":
            assert tok[1] == "vertex"
            count = int(tok[2])
        elif tok[0] == "property":
            assert tok[1] in ("float", "uchar")
            props.append((tok[2], tok[1]))
        i += 1
    body = [l for l in lines[i + 1 :] if l.strip()]
    assert len(body) == count
    rows = [[float(v) if t == "float" else int(v) for v, (_, t) in zip(l.split(), props)] for l in body]
    assert all(len(r) == len(props) for r in rows)
    return [name for name, _ in props], rows
