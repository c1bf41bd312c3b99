"""LFBE frontend matching the engine's documented conventions.

25 ms windows every 10 ms at 16 kHz, periodic Hann, 512-point FFT,
triangular mel filters over 0-8000 Hz, natural log floored at 1e-10.
Kept independent of the engine package on purpose; the parity tests pin
the two implementations against each other through the engine CLI.
"""

from __future__ import annotations

import numpy as np

SAMPLE_RATE = 16000
WINDOW = 400
HOP = 160
N_FFT = 512
FLOOR = 1e-10

_BANKS: dict[int, np.ndarray] = {}


def _mel(hz):
    return 2595.0 * np.log10(1.0 + hz / 700.0)


def _inv_mel(mel):
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def mel_bank(num_bins: int) -> np.ndarray:
    if num_bins not in _BANKS:
        freqs = np.linspace(0.0, SAMPLE_RATE / 2.0, N_FFT // 2 + 1)
        edges = _inv_mel(np.linspace(_mel(0.0), _mel(8000.0), num_bins + 2))
        bank = np.zeros((num_bins, freqs.size))
        for i in range(num_bins):
            lo, mid, hi = edges[i : i + 3]
            bank[i] = np.maximum(
                0.0, np.minimum((freqs - lo) / (mid - lo), (hi - freqs) / (hi - mid))
            )
        _BANKS[num_bins] = bank
    return _BANKS[num_bins]


def logmel(samples: np.ndarray, num_bins: int) -> np.ndarray:
    """int16 PCM to a (frames, num_bins) float32 LFBE matrix."""
    samples = np.asarray(samples)
    if samples.size < WINDOW:
        raise ValueError(f"need at least {WINDOW} samples, got {samples.size}")
    count = (samples.size - WINDOW) // HOP + 1
    idx = np.arange(count)[:, None] * HOP + np.arange(WINDOW)
    frames = samples[idx].astype(np.float64)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(WINDOW) / WINDOW)
    power = np.abs(np.fft.rfft(frames * window, n=N_FFT, axis=1)) ** 2
    return np.log(np.maximum(power @ mel_bank(num_bins).T, FLOOR)).astype(np.float32)
