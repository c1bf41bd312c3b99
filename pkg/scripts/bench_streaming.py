#!/usr/bin/env python3
"""Desk-scale timing of the two streaming strategies.

Feeds synthetic noise through a reference model with random weights and
reports per-strategy wall time and realtime factor. Pure engine-side
measurement; not an on-device profile.

Usage: python3 scripts/bench_streaming.py [CONFIG] [SECONDS]
"""

import sys
import time

import numpy as np

from kwspot.models import reference_config
from kwspot.network import Network
from kwspot.streaming import StreamEngine
from kwspot.weights import random_weights


def bench(config_name="CRNN-58k", seconds=30.0, chunk=1600):
    config = reference_config(config_name)
    net = Network(config, random_weights(config, seed=0))
    rng = np.random.default_rng(1)
    pcm = np.clip(rng.normal(0, 1500, size=int(seconds * 16000)), -32767, 32767).astype(np.int16)
    print(f"{config_name}: {seconds:.0f}s of audio, {chunk}-sample chunks")
    for strategy in ("bank", "hyper"):
        engine = StreamEngine(net, strategy=strategy)
        count = 0
        start = time.perf_counter()
        for i in range(0, len(pcm), chunk):
            posteriors, _ = engine.push_samples(pcm[i : i + chunk])
            count += len(posteriors)
        elapsed = time.perf_counter() - start
        print(
            f"  {strategy:<5} {elapsed:6.2f}s wall, {count} posteriors, "
            f"{seconds / elapsed:5.1f}x realtime"
        )


if __name__ == "__main__":
    name = sys.argv[1] if len(sys.argv) > 1 else "CRNN-58k"
    secs = float(sys.argv[2]) if len(sys.argv) > 2 else 30.0
    bench(name, secs)
