"""Synthetic keyword audio: a fixed chirp melody over noise.

A stand-in for real wakeword recordings that keeps endpoint ground truth
exact: positives embed a 1-second up-hold-down chirp, negatives get
noise, steady tones, or the reversed melody. Same seed, same bytes.
"""

from __future__ import annotations

import json
import os
import wave

import numpy as np

SAMPLE_RATE = 16000
KEYWORD_SAMPLES = 16000  # 1.0 s
NOISE_AMPLITUDE = 250.0


def write_wav(path, samples: np.ndarray) -> None:
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(SAMPLE_RATE)
        fh.writeframes(np.asarray(samples, dtype="<i2").tobytes())


def _glide(f0, f1, n):
    t = np.arange(n) / SAMPLE_RATE
    freq = np.linspace(f0, f1, n)
    phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE
    return np.sin(phase), t


def keyword_waveform(rng: np.random.Generator) -> np.ndarray:
    """Up-chirp 500->1800 Hz, hold, down-chirp to 900 Hz; soft envelope."""
    up, _ = _glide(500.0, 1800.0, 6400)
    hold, _ = _glide(1800.0, 1800.0, 3200)
    down, _ = _glide(1800.0, 900.0, 6400)
    signal = np.concatenate([up, hold, down])
    envelope = np.ones(KEYWORD_SAMPLES)
    ramp = 800
    envelope[:ramp] = np.linspace(0.0, 1.0, ramp)
    envelope[-ramp:] = np.linspace(1.0, 0.0, ramp)
    amplitude = float(rng.uniform(4000.0, 9000.0))  # per-utterance gain spread
    return amplitude * envelope * signal


def negative_waveform(rng: np.random.Generator, n: int) -> np.ndarray:
    kind = rng.integers(0, 3)
    amplitude = float(rng.uniform(4000.0, 9000.0))
    if kind == 0:
        return np.zeros(n)  # noise bed only
    if kind == 1:
        freq = float(rng.uniform(300.0, 3000.0))
        sig, _ = _glide(freq, freq, n)
        return amplitude * sig
    down, _ = _glide(1800.0, 500.0, n // 2)  # reversed melody
    up, _ = _glide(900.0, 1800.0, n - n // 2)
    return amplitude * np.concatenate([down, up])


def _noise(rng, n):
    return rng.normal(0.0, NOISE_AMPLITUDE, size=n)


def clip_samples(frames: int) -> int:
    return (frames - 1) * 160 + 400


def synthesize_dataset(out_dir, n_pos: int, n_neg: int, seed: int, frames: int = 100) -> str:
    """Write n_pos + n_neg WAVs plus manifest.jsonl; returns the manifest path."""
    if n_pos < 1 or n_neg < 1:
        raise ValueError("need at least one positive and one negative")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    n = clip_samples(frames)
    if n < KEYWORD_SAMPLES:
        raise ValueError(f"{frames} frames ({n} samples) cannot hold the 1 s keyword")
    entries = []
    for i in range(n_pos):
        clip = _noise(rng, n)
        offset = int(rng.integers(0, n - KEYWORD_SAMPLES + 1))
        clip[offset : offset + KEYWORD_SAMPLES] += keyword_waveform(rng)
        name = f"pos_{i:04d}.wav"
        write_wav(os.path.join(out_dir, name), np.clip(clip, -32767, 32767))
        entries.append(
            {
                "path": name,
                "label": "positive",
                "start_ms": offset * 1000.0 / SAMPLE_RATE,
                "end_ms": (offset + KEYWORD_SAMPLES) * 1000.0 / SAMPLE_RATE,
            }
        )
    for i in range(n_neg):
        clip = _noise(rng, n) + negative_waveform(rng, n)
        name = f"neg_{i:04d}.wav"
        write_wav(os.path.join(out_dir, name), np.clip(clip, -32767, 32767))
        entries.append({"path": name, "label": "negative"})
    manifest = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return manifest


def synthesize_stream_clip(path, seed: int, total_ms: float, keyword_start_ms: float):
    """A longer clip with one keyword planted at a known time.

    Returns (start_ms, end_ms) of the keyword.
    """
    rng = np.random.default_rng(seed)
    n = int(total_ms * SAMPLE_RATE / 1000.0)
    offset = int(keyword_start_ms * SAMPLE_RATE / 1000.0)
    if offset + KEYWORD_SAMPLES > n:
        raise ValueError("keyword does not fit in the clip")
    clip = _noise(rng, n)
    clip[offset : offset + KEYWORD_SAMPLES] += keyword_waveform(rng)
    write_wav(path, np.clip(clip, -32767, 32767))
    return keyword_start_ms, keyword_start_ms + KEYWORD_SAMPLES * 1000.0 / SAMPLE_RATE
