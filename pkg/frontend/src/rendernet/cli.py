"""Command-line entry point: train, evaluate, predict, baseline."""

from __future__ import annotations

import argparse
import json
import sys

from . import baseline, io
from .errors import FormatError, ParameterError, StateError
from .evaluate import evaluate
from .train import load_renderer, predict, train

_RUNTIME_ERRORS = (ParameterError, FormatError, StateError, OSError,
                   json.JSONDecodeError)


def _cmd_train(args):
    train(
        args.manifest,
        args.out,
        stage1_epochs=args.stage1_epochs,
        stage2_epochs=args.stage2_epochs,
        widths=tuple(args.widths),
        seed=args.seed,
        resume=args.resume,
    )
    return 0


def _cmd_evaluate(args):
    model, _ = load_renderer(args.checkpoint)
    report = evaluate(args.manifest, model, out_dir=args.out, split=args.split)
    print(json.dumps(report["mean"]))
    return 0


def _cmd_predict(args):
    model, _ = load_renderer(args.checkpoint)
    proj, _ = io.load_rgbd(args.input)
    io.save_png(predict(model, proj), args.out)
    return 0


def _cmd_baseline(args):
    proj, _ = io.load_rgbd(args.input)
    io.save_png(baseline.nn_inpaint(proj), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rendernet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the two-stage training schedule")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--stage1-epochs", type=int, default=100)
    p.add_argument("--stage2-epochs", type=int, default=0)
    p.add_argument("--widths", type=int, nargs=4, default=[64, 128, 256, 512])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="directory for predictions and report.json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="render one projection file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help=".rgbd projection")
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("baseline", help="nearest-neighbor inpainting of a projection")
    p.add_argument("--input", required=True, help=".rgbd projection")
    p.add_argument("--out", required=True, help="output PNG")
    p.set_defaults(func=_cmd_baseline)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"rendernet: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
