"""Trainer CLI: synthesize data, train, export engine-loadable weights."""

from __future__ import annotations

import argparse
import json
import sys

from .synth import synthesize_dataset, synthesize_stream_clip
from .train import TrainRun, TrainingDivergedError, train_and_export


def cmd_synth(args) -> int:
    manifest = synthesize_dataset(args.out, args.pos, args.neg, args.seed, frames=args.frames)
    print(manifest)
    return 0


def cmd_stream_clip(args) -> int:
    start, end = synthesize_stream_clip(args.out, args.seed, args.total_ms, args.keyword_at_ms)
    print(json.dumps({"path": args.out, "start_ms": start, "end_ms": end}))
    return 0


def cmd_train(args) -> int:
    run = TrainRun(
        weights_in=args.weights_in,
        manifest=args.manifest,
        out_path=args.out,
        steps=args.steps,
        batch_size=args.batch,
        learning_rate=args.lr,
        dropout=args.dropout,
        seed=args.seed,
        init_from_weights=args.init_weights,
    )
    try:
        stats = train_and_export(run)
    except TrainingDivergedError as exc:
        print(f"kws-trainer: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(stats))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kws-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a labeled WAV dataset + manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--pos", type=int, default=40)
    p.add_argument("--neg", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=100,
                   help="clip length in 10 ms frames; must hold the 1 s keyword (>= 99)")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("stream-clip", help="long clip with one planted keyword")
    p.add_argument("--out", required=True)
    p.add_argument("--total-ms", type=float, default=3000.0)
    p.add_argument("--keyword-at-ms", type=float, default=1200.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_stream_clip)

    p = sub.add_parser("train", help="train a config and export engine weights")
    p.add_argument("--weights-in", required=True,
                   help="engine weight container supplying the config")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-weights", action="store_true",
                   help="start from the container's tensors instead of fresh init")
    p.set_defaults(fn=cmd_train)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError) as exc:
        print(f"kws-trainer: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
