"""Command-line surface.

Subcommands: featurize, count, rf, infer, stream, eval, init-random.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import struct
import sys

import numpy as np

from .detect import DetectionEvent, DetectorConfig, endpoint_delta, latency
from .errors import KwspotError
from .evaluate import evaluate_dataset, load_manifest, positive_events
from .frontend import compute_lfbe, delta_lfbe, read_wav
from .models import (
    ModelConfig,
    config_from_json,
    config_to_dict,
    footprint,
    receptive_field,
    reference_config,
)
from .network import Network
from .streaming import STRATEGIES, StreamEngine
from .weights import load_weights, random_weights, save_weights


def resolve_config(name_or_path: str) -> ModelConfig:
    """A zoo name like CRNN-239k, or a path to a config JSON file."""
    if os.path.exists(name_or_path):
        with open(name_or_path, "r", encoding="utf-8") as fh:
            return config_from_json(fh.read())
    return reference_config(name_or_path)


def _load_network(path: str) -> Network:
    config, weights = load_weights(path)
    return Network(config, weights)


def _trace_line(sp) -> str:
    return f"{sp.step},{sp.first_frame},{sp.last_frame},{sp.posterior:.6f}"


def _event_json(event: DetectionEvent) -> str:
    record = {
        "start_ms": event.start_ms(),
        "end_ms": event.end_ms(),
        "peak": round(event.peak_posterior, 6),
        "latency_ms": None,
    }
    if event.detect_wall_ms is not None:
        record["latency_ms"] = round(latency(event), 3)
    return json.dumps(record, sort_keys=True)


def cmd_featurize(args) -> int:
    feats = compute_lfbe(read_wav(args.wav), args.bins)
    if args.delta:
        feats = delta_lfbe(feats)
    out = sys.stdout if args.output is None else open(args.output, "w", encoding="utf-8")
    try:
        for frame in feats:
            out.write(" ".join(f"{v:.6f}" for v in frame) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_count(args) -> int:
    config = resolve_config(args.config)
    report = footprint(config)
    if args.json:
        payload = {
            "name": config.name,
            "parameters": report.parameters,
            "multiplies": report.multiplies,
            "bias_parameters": report.bias_parameters,
            "layers": [
                {"name": r.name, "kind": r.kind, "parameters": r.parameters,
                 "multiplies": r.multiplies}
                for r in report.layers
            ],
        }
        print(json.dumps(payload, sort_keys=True))
        return 0
    print(f"model: {config.name}")
    print(f"{'layer':<12} {'kind':<10} {'parameters':>12} {'multiplies':>14}")
    for r in report.layers:
        print(f"{r.name:<12} {r.kind:<10} {r.parameters:>12} {r.multiplies:>14}")
    print(f"{'total':<12} {'':<10} {report.parameters:>12} {report.multiplies:>14}")
    return 0


def cmd_rf(args) -> int:
    config = resolve_config(args.config)
    rf, stride, steps = receptive_field(config)
    print(f"rf={rf} stride={stride} steps={steps}")
    return 0


def cmd_config(args) -> int:
    config = resolve_config(args.config)
    print(json.dumps(config_to_dict(config), sort_keys=True, indent=2))
    return 0


def cmd_infer(args) -> int:
    network = _load_network(args.weights)
    feats = compute_lfbe(read_wav(args.wav), network.config.input_bins)
    for sp in network.sliding_posteriors(feats):
        print(_trace_line(sp))
    return 0


def cmd_stream(args) -> int:
    network = _load_network(args.weights)
    engine = StreamEngine(
        network,
        strategy=args.strategy,
        detector=DetectorConfig(threshold=args.threshold, hangover_steps=args.hangover),
    )
    trace_out = sys.stdout if args.trace is None else open(args.trace, "w", encoding="utf-8")
    events_out = sys.stdout if args.events is None else open(args.events, "w", encoding="utf-8")
    binary_out = None if args.binary_trace is None else open(args.binary_trace, "wb")
    source = sys.stdin.buffer
    try:
        leftover = b""
        while True:
            chunk = source.read(args.chunk_samples * 2)
            if not chunk:
                break
            chunk = leftover + chunk
            usable = len(chunk) - (len(chunk) % 2)
            leftover = chunk[usable:]
            samples = np.frombuffer(chunk[:usable], dtype="<i2")
            posteriors, events = engine.push_samples(samples)
            for sp in posteriors:
                trace_out.write(_trace_line(sp) + "\n")
                if binary_out is not None:
                    binary_out.write(
                        struct.pack("<4f", sp.step, sp.first_frame, sp.last_frame, sp.posterior)
                    )
            for event in events:
                events_out.write(_event_json(event) + "\n")
        if leftover:
            raise KwspotError(
                f"stream ended mid-sample ({len(leftover)} dangling byte); "
                "input must be 16-bit little-endian PCM"
            )
        for event in engine.finish():
            events_out.write(_event_json(event) + "\n")
    finally:
        for fh in (trace_out, events_out):
            if fh is not sys.stdout:
                fh.close()
        if binary_out is not None:
            binary_out.close()
    return 0


def cmd_eval(args) -> int:
    network = _load_network(args.weights)
    manifest = load_manifest(args.manifest)
    report = evaluate_dataset(network, manifest, mr=args.mr)
    endpoint = None
    refs_present = [e for e in manifest if e.reference() is not None and e.label == "positive"]
    if refs_present and 0.0 < report.threshold < 1.0:
        events = []
        refs = []
        for entry in refs_present:
            for event in positive_events(network, entry, report.threshold):
                events.append(event)
                break  # score endpoints of the first event per utterance
            refs.append(entry.reference())
        if events:
            try:
                ep = endpoint_delta(events, refs)
                endpoint = {
                    "mean_abs_start_ms": ep.mean_abs_start_ms,
                    "mean_abs_end_ms": ep.mean_abs_end_ms,
                    "matched": ep.matched,
                    "missed_refs": ep.missed_refs,
                }
            except KwspotError:
                endpoint = None
    payload = {
        "miss_rate": report.miss_rate,
        "threshold": report.threshold if report.threshold != float("inf") else None,
        "false_accepts": report.false_accepts,
        "num_positive": report.num_positive,
        "num_negative": report.num_negative,
        "failures": report.failures,
        "endpoint_delta": endpoint,
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True))
        return 0
    print(f"utterances: {report.num_positive} positive, {report.num_negative} negative")
    thr = "inf" if report.threshold == float("inf") else f"{report.threshold:.6f}"
    print(f"miss rate {report.miss_rate:.2%} -> threshold {thr}")
    print(f"false accepts: {report.false_accepts}")
    if endpoint is not None:
        print(
            f"endpoint delta: start {endpoint['mean_abs_start_ms']:.1f} ms, "
            f"end {endpoint['mean_abs_end_ms']:.1f} ms over {endpoint['matched']} matches"
        )
    if report.failures:
        print(f"failures: {len(report.failures)}", file=sys.stderr)
    return 0


def cmd_init_random(args) -> int:
    config = resolve_config(args.config)
    save_weights(config, random_weights(config, seed=args.seed), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwspot", description="Wakeword spotting engine for CRNN/CNN/DNN models."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="WAV to LFBE feature rows on stdout")
    p.add_argument("wav")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--delta", action="store_true", help="apply frame differencing")
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_featurize)

    p = sub.add_parser("count", help="parameter/multiply footprint of a config")
    p.add_argument("config", help="zoo name or config JSON path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("rf", help="receptive field / stride / conv timesteps")
    p.add_argument("config")
    p.set_defaults(fn=cmd_rf)

    p = sub.add_parser("config", help="print a config as schema JSON")
    p.add_argument("config")
    p.set_defaults(fn=cmd_config)

    p = sub.add_parser("infer", help="offline sliding-window posterior trace")
    p.add_argument("weights")
    p.add_argument("wav")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("stream", help="stdin PCM to posterior trace + events")
    p.add_argument("weights")
    p.add_argument("--strategy", choices=STRATEGIES, default="bank")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--hangover", type=int, default=3)
    p.add_argument("--chunk-samples", type=int, default=1600)
    p.add_argument("--trace", default=None, help="trace file (default stdout)")
    p.add_argument("--events", default=None, help="events file (default stdout)")
    p.add_argument("--binary-trace", default=None, help="f32-LE trace records")
    p.set_defaults(fn=cmd_stream)

    p = sub.add_parser("eval", help="false accepts at a fixed miss rate")
    p.add_argument("weights")
    p.add_argument("manifest")
    p.add_argument("--mr", type=float, default=0.15)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("init-random", help="write seeded random weights for a config")
    p.add_argument("config")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_init_random)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KwspotError as exc:
        print(f"kwspot: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"kwspot: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
