"""Helpers for driving the engine CLI as an external tool."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

ENGINE = [sys.executable, "-m", "kwspot"]


def engine(*args, stdin_bytes=None):
    proc = subprocess.run(
        [*ENGINE, *map(str, args)], input=stdin_bytes, capture_output=True
    )
    if proc.returncode != 0:
        raise AssertionError(
            f"engine {' '.join(map(str, args))} failed ({proc.returncode}): "
            f"{proc.stderr.decode()}"
        )
    return proc.stdout.decode()


def parse_trace(text):
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("{"):
            continue
        step, first, last, posterior = line.split(",")
        records.append((int(step), int(first), int(last), float(posterior)))
    return records


def parse_events(text):
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


@pytest.fixture(scope="session")
def engine_available():
    out = engine("rf", "CRNN-58k")
    assert out.strip() == "rf=28 stride=8 steps=10"
    return True
