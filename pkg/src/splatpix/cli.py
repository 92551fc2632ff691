"""Command-line entry point for the full pipeline.

One binary with subcommands; every invocation with identical flags and
inputs produces byte-identical artifacts. Outputs are written to a
temporary file in the destination directory and renamed into place, so a
failing run leaves no partial artifacts.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import body_model as bm
from . import camera as cam_mod
from . import dataset as ds
from . import mesh_ops, metrics, raster
from .splat import normalize_depth, save_rgbd, splat as run_splat
from .body_model import ColoredVertexSet
from .errors import (
    DegenerateSkinningError,
    FormatError,
    ParameterError,
    ParseError,
    TopologyError,
)

_RUNTIME_ERRORS = (
    ParameterError,
    DegenerateSkinningError,
    TopologyError,
    ParseError,
    FormatError,
    OSError,
    json.JSONDecodeError,
)


@contextlib.contextmanager
def _atomic(path):
    """Yield a temp path next to the target; rename over it on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _csv_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v != ""])
    except ValueError as exc:
        raise ParameterError(f"expected comma-separated floats, got {text!r}") from exc


def _frame_theta(args, joints: int) -> np.ndarray:
    if args.theta is not None:
        return _csv_floats(args.theta)
    if args.poses is not None:
        frames = bm.load_pose_sequence(args.poses)
        if not 0 <= args.frame < len(frames):
            raise ParameterError(f"frame {args.frame} out of range for {len(frames)} frames")
        return frames[args.frame]
    return np.zeros(3 * joints)


def _subject_colors(args, n: int) -> np.ndarray:
    if getattr(args, "colors_from", None):
        verts, _, _ = mesh_ops.load_mesh(args.colors_from)
        if len(verts) != n:
            raise ParameterError("--colors-from vertex count does not match the model")
        return verts.colors
    return np.full((n, 3), mesh_ops.DEFAULT_COLOR)


def _save_mesh_atomic(path, verts, faces, uv=None):
    ext = Path(path).suffix.lower()
    with _atomic(path) as tmp:
        if ext == ".obj":
            mesh_ops._save_obj(tmp, verts, faces, uv)
        elif ext == ".ply":
            mesh_ops._save_ply(tmp, verts, faces)
        else:
            raise ParameterError(f"unsupported mesh extension: {path}")


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_splat(args):
    verts, _, _ = mesh_ops.load_mesh(args.mesh)
    cam = cam_mod.load_camera(args.camera)
    img = run_splat(verts, cam)
    if args.depth_range is not None:
        img = normalize_depth(img, *args.depth_range)
    with _atomic(args.out) as tmp:
        save_rgbd(img, tmp)
    return 0


def _cmd_rasterize(args):
    verts, faces, _ = mesh_ops.load_mesh(args.mesh)
    cam = cam_mod.load_camera(args.camera)
    img = raster.rasterize(verts, faces, cam, background=tuple(args.background))
    with _atomic(args.out) as tmp:
        if str(args.out).lower().endswith(".imgf"):
            raster.save_imgf(img, tmp)
        else:
            raster.save_png(img, tmp)
    return 0


def _cmd_pose(args):
    model = bm.load_model(args.model)
    beta = _csv_floats(args.beta) if args.beta else np.zeros(model.num_shape_dims)
    theta = _frame_theta(args, model.num_joints)
    posed = bm.pose_mesh(model, beta, theta)
    verts = ColoredVertexSet(posed, _subject_colors(args, model.num_vertices))
    _save_mesh_atomic(args.out, verts, model.faces, model.uv)
    return 0


def _cmd_unpose(args):
    model = bm.load_model(args.model)
    verts, faces, uv = mesh_ops.load_mesh(args.mesh)
    theta = _frame_theta(args, model.num_joints)
    template = bm.unpose(model, verts, theta)
    _save_mesh_atomic(args.out, template, faces if faces.size else model.faces, uv)
    return 0


def _cmd_repose(args):
    model = bm.load_model(args.model)
    verts, faces, uv = mesh_ops.load_mesh(args.template)
    theta = _frame_theta(args, model.num_joints)
    posed = bm.repose_subject(verts, model, theta)
    _save_mesh_atomic(args.out, posed, faces if faces.size else model.faces, uv)
    return 0


def _cmd_reshape(args):
    model = bm.load_model(args.model)
    beta = np.zeros(model.num_shape_dims)
    for spec in args.beta_delta:
        try:
            idx, _, val = spec.partition("=")
            beta[int(idx)] += float(val)
        except (ValueError, IndexError) as exc:
            raise ParameterError(f"bad --beta-delta {spec!r}, expected INDEX=VALUE") from exc
    shaped = model.template + bm.shape_offsets(model, beta)
    verts = ColoredVertexSet(shaped, _subject_colors(args, model.num_vertices))
    _save_mesh_atomic(args.out, verts, model.faces, model.uv)
    return 0


def _cmd_animate(args):
    model = bm.load_model(args.model)
    frames = bm.load_pose_sequence(args.poses)
    colors = _subject_colors(args, model.num_vertices)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    intr = ds.Intrinsics(
        fx=args.focal, fy=args.focal,
        cx=args.width / 2.0, cy=args.height / 2.0,
        width=args.width, height=args.height,
    )
    target = model.joint_regressor @ model.template
    rig = ds.camera_rig(args.rig, args.radius, target.mean(axis=0), intr)
    for ci, cam in enumerate(rig):
        with _atomic(out / f"cam_{ci:03d}.json") as tmp:
            cam_mod.save_camera(cam, tmp)
    for fi, theta in enumerate(frames):
        posed = ColoredVertexSet(bm.pose_mesh(model, np.zeros(model.num_shape_dims), theta), colors)
        for ci, cam in enumerate(rig):
            img = run_splat(posed, cam)
            if args.depth_range is not None:
                img = normalize_depth(img, *args.depth_range)
            with _atomic(out / f"frame_{fi:04d}_cam_{ci:03d}.rgbd") as tmp:
                save_rgbd(img, tmp)
            if args.raster:
                rendered = raster.rasterize(posed, model.faces, cam)
                with _atomic(out / f"frame_{fi:04d}_cam_{ci:03d}.png") as tmp:
                    raster.save_png(rendered, tmp)
    return 0


def _cmd_dataset_gen(args):
    config = ds.DatasetConfig.from_json(args.config)
    if args.out:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    ds.build_dataset(config, threads=args.threads)
    return 0


def _cmd_synth_model(args):
    seed = args.seed if args.seed is not None else 0
    model, colored = ds.synth_subject(seed)
    with _atomic(args.out) as tmp:
        bm.save_model(model, tmp)
    if args.mesh_out:
        _save_mesh_atomic(args.mesh_out, colored, model.faces, model.uv)
    return 0


def _cmd_metrics(args):
    img_a = raster.load_image(args.a)
    img_b = raster.load_image(args.b)
    report = metrics.psnr(img_a, img_b)
    line = metrics.report_line(args.a, args.b, report)
    if args.out:
        with _atomic(args.out) as tmp:
            Path(tmp).write_text(line + "\n")
    else:
        print(line)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_pose_source(p):
    p.add_argument("--theta", help="comma-separated axis-angle radians")
    p.add_argument("--poses", help="pose sequence JSON file")
    p.add_argument("--frame", type=int, default=0, help="frame index into --poses")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatpix")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("SMPLPIX_THREADS", "0")),
                        help="worker pool size, 0 = auto")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("splat", help="project a colored mesh into an RGB-D image")
    p.add_argument("--mesh", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--depth-range", nargs=2, type=float, metavar=("MIN", "MAX"),
                   help="normalize depth to [0,1) over this metric range")
    p.set_defaults(func=_cmd_splat)

    p = sub.add_parser("rasterize", help="z-buffer render a colored mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--out", required=True, help=".png or .imgf")
    p.add_argument("--background", nargs=3, type=float, default=(1.0, 1.0, 1.0))
    p.set_defaults(func=_cmd_rasterize)

    p = sub.add_parser("pose", help="pose a body model and write the mesh")
    p.add_argument("--model", required=True)
    p.add_argument("--beta", help="comma-separated shape coefficients")
    _add_pose_source(p)
    p.add_argument("--colors-from", help="mesh supplying per-vertex colors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pose)

    p = sub.add_parser("unpose", help="recover a subject template from a posed mesh")
    p.add_argument("--model", required=True)
    p.add_argument("--mesh", required=True, help="posed registration mesh")
    _add_pose_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_unpose)

    p = sub.add_parser("repose", help="pose a subject-specific template")
    p.add_argument("--model", required=True)
    p.add_argument("--template", required=True, help="unposed subject template mesh")
    _add_pose_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_repose)

    p = sub.add_parser("reshape", help="apply shape-space offsets to the template")
    p.add_argument("--model", required=True)
    p.add_argument("--beta-delta", action="append", default=[], metavar="INDEX=VALUE")
    p.add_argument("--colors-from", help="mesh supplying per-vertex colors")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reshape)

    p = sub.add_parser("animate", help="render a pose sequence from an orbit rig")
    p.add_argument("--model", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--rig", type=int, default=8, help="number of rig cameras")
    p.add_argument("--radius", type=float, default=0.45)
    p.add_argument("--width", type=int, default=308)
    p.add_argument("--height", type=int, default=410)
    p.add_argument("--focal", type=float, default=492.0)
    p.add_argument("--depth-range", nargs=2, type=float, metavar=("MIN", "MAX"),
                   default=(0.1, 0.7))
    p.add_argument("--colors-from", help="mesh supplying per-vertex colors")
    p.add_argument("--raster", action="store_true", help="also write rasterized PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_animate)

    p = sub.add_parser("dataset-gen", help="generate a paired training dataset")
    p.add_argument("--config", required=True, help="dataset config JSON")
    p.add_argument("--out", help="override the config output directory")
    p.set_defaults(func=_cmd_dataset_gen)

    p = sub.add_parser("synth-model", help="write a procedural synthetic body model")
    p.add_argument("--out", required=True, help="model container path")
    p.add_argument("--mesh-out", help="also write the colored template mesh")
    p.set_defaults(func=_cmd_synth_model)

    p = sub.add_parser("metrics", help="compare two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", help="write the JSON line here instead of stdout")
    p.set_defaults(func=_cmd_metrics)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"splatpix: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
