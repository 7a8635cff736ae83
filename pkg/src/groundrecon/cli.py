"""Command-line entry point: ``groundrecon <subcommand> ...``.

Exit status is 0 on success, 2 on usage errors and 1 when a stage fails;
failures print one ``code=<kind> msg=<text>`` line on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io
from .camera_est import GridSpec, estimate_camera_detailed
from .core import RECONSTRUCTION_GROUND, CameraIntrinsics, CameraPose, PointCloud
from .exceptions import GroundReconError
from .fields import render_perspective_field

log = logging.getLogger("groundrecon")

THREADS_ENV = "GROUNDRECON_THREADS"


class UsageError(Exception):
    pass


def _threads(args):
    n = args.threads if args.threads is not None else int(os.environ.get(THREADS_ENV, "1"))
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return n


def _grid_spec(args):
    return GridSpec(
        fov_range=tuple(args.fov_range),
        pitch_range=tuple(args.pitch_range),
        roll_range=tuple(args.roll_range),
        fov_step=args.step,
        pitch_step=args.step,
        roll_step=args.step,
        levels=args.levels,
        polish=args.polish,
    )


def _camera(args, pf=None, shape=None):
    """Camera from ``--camera`` or, failing that, from the perspective field."""
    if getattr(args, "camera", None):
        return io.read_camera(args.camera)
    est = estimate_camera_detailed(pf, None, _grid_spec(args))
    H, W = shape or pf.shape
    log.info("estimated fov=%.3f pitch=%.3f roll=%.3f cost=%.3g", est.fov_deg, est.pitch_deg, est.roll_deg, est.cost)
    return CameraIntrinsics(est.fov_deg, W, H), CameraPose(est.pitch_deg, est.roll_deg)


def _fields(args):
    ph = io.heights_from_grid(io.load_grids(args.heights))
    pf = io.field_from_grid(io.load_grids(args.pfield)) if args.pfield else None
    if pf is None and not args.camera:
        raise UsageError("need --pfield, --camera or both")
    return ph, pf


def _reconstruct(args, image=None):
    from .reproject import reconstruct_cloud

    ph, pf = _fields(args)
    camera = _camera(args, pf, ph.shape)
    return reconstruct_cloud(ph, pf, camera=camera, image=image, eps_z=args.eps_z), ph


# subcommands


def cmd_render(args):
    from .raytracer import render_ground_truth

    scene = io.read_scene(args.scene)
    result = render_ground_truth(scene, rgb_samples=args.rgb_samples, seed=args.seed)
    files = io.write_render_bundle(args.out, result)
    log.info("wrote %d files to %s", len(files), args.out)


def cmd_fields(args):
    if args.camera:
        intr, pose = io.read_camera(args.camera)
    else:
        if None in (args.fov, args.pitch, args.width, args.height):
            raise UsageError("give --camera or all of --fov --pitch --width --height")
        intr, pose = CameraIntrinsics(args.fov, args.width, args.height), CameraPose(args.pitch, args.roll)
    io.write_grid(args.out, io.field_grid(render_perspective_field(intr, pose)))


def cmd_estimate_camera(args):
    pf = io.field_from_grid(io.load_grids(args.pfield))
    mask = None
    if args.mask:
        mask = io.read_grid(args.mask).values[0] > 0.5
    est = estimate_camera_detailed(pf, mask, _grid_spec(args))
    H, W = pf.shape
    camera = (CameraIntrinsics(est.fov_deg, W, H), CameraPose(est.pitch_deg, est.roll_deg))
    if args.out:
        io.write_camera(args.out, camera)
    out = io.camera_to_dict(*camera)
    out["cost"] = est.cost
    print(json.dumps(out, sort_keys=True))


def cmd_reconstruct(args):
    from .reproject import depth_from_reconstruction

    image = io.read_ppm(args.image) if args.image else None
    rec, ph = _reconstruct(args, image)
    merged = PointCloud(
        np.concatenate([rec.front.points, rec.back.points, rec.feet.points]),
        colors=None if rec.front.colors is None else np.concatenate([rec.front.colors, rec.back.colors, rec.feet.colors]),
    )
    io.write_ply(args.out, merged)
    if args.depth:
        io.write_grid(args.depth, depth_from_reconstruction(rec.front, rec.camera, ph.shape))
    if args.camera_out:
        io.write_camera(args.camera_out, rec.camera)
    log.info("%d front, %d back, %d feet points", len(rec.front), len(rec.back), len(rec.feet))


def _light(args):
    from .relight import LightSpec

    if args.light_dir is not None:
        return LightSpec.directional(args.light_dir, args.softness)
    if args.light_pos is not None:
        return LightSpec.point(args.light_pos, args.softness)
    return LightSpec.from_elevation(args.light_elevation, args.light_azimuth, args.softness)


def cmd_shadow(args):
    from .relight import cast_shadow, composite_shadow, fill_between

    image = io.read_ppm(args.image)
    rec, ph = _reconstruct(args)
    solid = fill_between(rec.front, rec.back, args.chord_samples)
    layer = cast_shadow(solid, RECONSTRUCTION_GROUND, _light(args), rec.camera, ph.shape)
    out = composite_shadow(image.values, layer.values[0], ph.mask, args.strength)
    io.write_ppm(args.out, out)
    if args.layer:
        io.write_grid(args.layer, layer)


def cmd_reflect(args):
    from .relight import composite_reflection, fill_between, render_reflection

    image = io.read_ppm(args.image)
    rec, ph = _reconstruct(args, image)
    cloud = fill_between(rec.front, rec.back, args.chord_samples)
    layer = render_reflection(cloud, RECONSTRUCTION_GROUND, rec.camera, ph.shape, args.alpha, args.falloff)
    io.write_ppm(args.out, composite_reflection(image.values, layer.values, ph.mask))
    if args.layer:
        io.write_grid(args.layer, layer)


def _bundle_cloud(bundle, args):
    from .reproject import reconstruct_cloud

    camera = bundle["camera"]
    if camera is None:
        camera = _camera(argparse.Namespace(**{**vars(args), "camera": None}), bundle["field"])
    rec = reconstruct_cloud(bundle["heights"], bundle["field"], camera=camera)
    return PointCloud(
        np.concatenate([rec.front.points, rec.back.points]),
        np.concatenate([rec.front.pixels, rec.back.pixels + rec.front.image_shape[0] * rec.front.image_shape[1]]),
    )


def cmd_evaluate(args):
    from .metrics import evaluate_sample

    pred, gt = io.read_bundle(args.pred), io.read_bundle(args.gt)
    mask = gt["mask"]
    pred_cloud = gt_cloud = None
    if pred["heights"] is not None and gt["heights"] is not None:
        pred_cloud, gt_cloud = _bundle_cloud(pred, args), _bundle_cloud(gt, args)
    report = evaluate_sample(
        pred_depth=pred["depth"],
        gt_depth=gt["depth"],
        mask=mask,
        pred_cloud=pred_cloud,
        gt_cloud=gt_cloud,
        pred_fields=(pred["heights"], pred["field"]),
        gt_fields=(gt["heights"], gt["field"]),
        align=not args.no_align,
        space=args.space,
        calibrate_chamfer=not args.no_calibrate,
    )
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_dataset(args):
    with open(args.spec) as fh:
        d = json.load(fh)
    if args.seed is not None:
        d["seed"] = args.seed
    spec = io.DatasetSpec.from_dict(d)
    workers = 1 if args.deterministic else _threads(args)
    manifest = io.generate_dataset(spec, args.out, workers=workers)
    print(json.dumps({"kept": manifest["kept"], "rejected": manifest["rejected"]}))


# parser


def _add_grid_flags(p, polish=False):
    g = p.add_argument_group("camera search")
    g.add_argument("--fov-range", nargs=2, type=float, default=(20.0, 110.0), metavar=("LO", "HI"))
    g.add_argument("--pitch-range", nargs=2, type=float, default=(-70.0, 70.0), metavar=("LO", "HI"))
    g.add_argument("--roll-range", nargs=2, type=float, default=(-45.0, 45.0), metavar=("LO", "HI"))
    g.add_argument("--step", type=float, default=2.0, help="coarse step in degrees")
    g.add_argument("--levels", type=int, default=3, help="refinement rounds")
    g.add_argument(
        "--polish", action=argparse.BooleanOptionalAction, default=polish,
        help="continuous descent from the grid minimizer",
    )


def _add_field_inputs(p, pfield_required=False):
    p.add_argument("--heights", nargs="+", required=True, help="ORGF file(s) or sample directory with pixel heights")
    p.add_argument("--pfield", nargs="+", required=pfield_required, help="ORGF file(s) with latitude, up_sin, up_cos")
    p.add_argument("--camera", help="camera JSON; estimated from --pfield when omitted")
    p.add_argument("--eps-z", type=float, default=1e-4, help="minimum depression of the foot ray below the horizon")
    _add_grid_flags(p, polish=True)


def _add_light_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--light-dir", nargs=3, type=float, metavar=("X", "Y", "Z"), help="travel direction of a directional light")
    g.add_argument("--light-pos", nargs=3, type=float, metavar=("X", "Y", "Z"), help="position of a point light")
    p.add_argument("--light-elevation", type=float, default=45.0, help="degrees above the horizon")
    p.add_argument("--light-azimuth", type=float, default=0.0, help="degrees from the view direction toward +X")
    p.add_argument("--softness", type=float, default=0.0, help="Gaussian blur sigma in pixels")


def build_parser():
    parser = argparse.ArgumentParser(prog="groundrecon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
    parser.add_argument("--deterministic", action="store_true", help="run single-threaded")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("render", help="ray-trace a scene file into a ground-truth sample")
    p.add_argument("scene")
    p.add_argument("--out", required=True)
    p.add_argument("--rgb-samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fields", help="perspective field of a known camera")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--camera")
    src.add_argument("--fov", type=float)
    p.add_argument("--pitch", type=float)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fields)

    p = sub.add_parser("estimate-camera", help="recover fov, pitch and roll from a perspective field")
    p.add_argument("--pfield", nargs="+", required=True)
    p.add_argument("--mask", help="ORGF mask of pixels to use")
    p.add_argument("--out", help="camera JSON to write")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_estimate_camera)

    p = sub.add_parser("reconstruct", help="point clouds and depth from pixel heights")
    _add_field_inputs(p)
    p.add_argument("--image", help="PPM to color the points")
    p.add_argument("--out", required=True, help="PLY with front, back and foot points")
    p.add_argument("--depth", help="ORGF depth map to write")
    p.add_argument("--camera-out", help="camera JSON to write")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("shadow", help="cast the object's shadow on the ground")
    _add_field_inputs(p)
    _add_light_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--strength", type=float, default=0.6)
    p.add_argument("--chord-samples", type=int, default=16, help="samples between front and back surfaces")
    p.add_argument("--out", required=True)
    p.add_argument("--layer", help="ORGF shadow layer to write")
    p.set_defaults(func=cmd_shadow)

    p = sub.add_parser("reflect", help="mirror the object in the ground")
    _add_field_inputs(p)
    p.add_argument("--image", required=True)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--falloff", type=float, default=0.5)
    p.add_argument("--chord-samples", type=int, default=16, help="samples between front and back surfaces")
    p.add_argument("--out", required=True)
    p.add_argument("--layer", help="ORGF RGBA layer to write")
    p.set_defaults(func=cmd_reflect)

    p = sub.add_parser("evaluate", help="compare a predicted sample directory with the ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out")
    p.add_argument("--space", choices=("depth", "disparity"), default="depth")
    p.add_argument("--no-align", action="store_true")
    p.add_argument("--no-calibrate", action="store_true", help="skip the scale calibration before chamfer")
    _add_grid_flags(p, polish=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dataset", help="generate a synthetic corpus from a dataset spec")
    p.add_argument("spec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_dataset)
    return parser


def _one_line(text):
    return " ".join(str(text).split())


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        _threads(args)  # validate early
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"code=usage msg={_one_line(exc)}", file=sys.stderr)
        return 2
    except GroundReconError as exc:
        print(f"code={exc.code} msg={_one_line(exc)}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"code=io msg={_one_line(exc)}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"code=format msg=missing channel or key {_one_line(exc)}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"code=format msg={_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
