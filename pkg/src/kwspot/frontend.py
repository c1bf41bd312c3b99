"""LFBE feature extraction and WAV/PCM ingestion.

16 kHz mono PCM in, log mel filterbank energy frames out: 25 ms windows
(400 samples) every 10 ms (160 samples), 512-point FFT with a periodic
Hann window, triangular mel filters spanning 0-8000 Hz, natural log with
a 1e-10 energy floor so silence stays finite.

All functions are pure; call them from as many threads as you like.
"""

from __future__ import annotations

import functools
import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AudioTooShortError,
    InsufficientFramesError,
    UnsupportedFormatError,
    UnsupportedRateError,
)

SAMPLE_RATE = 16000
WINDOW_SAMPLES = 400
HOP_SAMPLES = 160
FFT_SIZE = 512
ENERGY_FLOOR = 1e-10
MEL_LOW_HZ = 0.0
MEL_HIGH_HZ = 8000.0
FRAME_HOP_MS = 10.0
FRAME_WINDOW_MS = 25.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono 16-bit PCM audio at 16 kHz."""

    samples: np.ndarray = field(repr=False)
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.int16))

    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate


def num_frames(num_samples: int) -> int:
    """Frames produced by 400-sample windows advancing 160 samples."""
    if num_samples < WINDOW_SAMPLES:
        return 0
    return (num_samples - WINDOW_SAMPLES) // HOP_SAMPLES + 1


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@functools.lru_cache(maxsize=8)
def mel_filterbank(num_bins: int, fft_size: int = FFT_SIZE) -> np.ndarray:
    """Triangular mel filters as a (num_bins, fft_size//2+1) matrix."""
    n_freqs = fft_size // 2 + 1
    freqs = np.linspace(0.0, SAMPLE_RATE / 2.0, n_freqs)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(MEL_LOW_HZ), _hz_to_mel(MEL_HIGH_HZ), num_bins + 2))
    bank = np.zeros((num_bins, n_freqs))
    for m in range(num_bins):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (center - lo)
        falling = (hi - freqs) / (hi - center)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


@functools.lru_cache(maxsize=1)
def _hann_window() -> np.ndarray:
    # Periodic Hann over the 400-sample analysis window.
    n = np.arange(WINDOW_SAMPLES)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / WINDOW_SAMPLES)


def _lfbe_of_windows(windows: np.ndarray, num_bins: int) -> np.ndarray:
    """Windows (n, 400) of raw samples to (n, num_bins) float32 LFBEs."""
    spectrum = np.fft.rfft(windows * _hann_window(), n=FFT_SIZE, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    mel = power @ mel_filterbank(num_bins).T
    return np.log(np.maximum(mel, ENERGY_FLOOR)).astype(np.float32)


def compute_lfbe(audio: AudioBuffer, num_bins: int = 64) -> np.ndarray:
    """Log mel filterbank energies, one row per 10 ms frame.

    Raises AudioTooShortError below one window and UnsupportedRateError
    for anything but 16 kHz.
    """
    if audio.sample_rate != SAMPLE_RATE:
        raise UnsupportedRateError(f"expected {SAMPLE_RATE} Hz, got {audio.sample_rate}")
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    samples = audio.samples
    n = num_frames(len(samples))
    if n == 0:
        raise AudioTooShortError(
            f"need at least {WINDOW_SAMPLES} samples, got {len(samples)}"
        )
    starts = np.arange(n) * HOP_SAMPLES
    windows = samples[starts[:, None] + np.arange(WINDOW_SAMPLES)].astype(np.float64)
    return _lfbe_of_windows(windows, num_bins)


def lfbe_frame(window_samples: np.ndarray, num_bins: int) -> np.ndarray:
    """One LFBE frame from exactly one 400-sample window.

    The streaming front end calls this once per frame so the arithmetic
    (and therefore the output bits) never depends on how the incoming
    PCM was chunked.
    """
    if len(window_samples) != WINDOW_SAMPLES:
        raise AudioTooShortError(f"window must be {WINDOW_SAMPLES} samples")
    window = np.asarray(window_samples, dtype=np.float64)[None, :]
    return _lfbe_of_windows(window, num_bins)[0]


def delta_lfbe(feats: np.ndarray) -> np.ndarray:
    """Frame-to-frame difference: out[i] = feats[i+1] - feats[i].

    Kills any constant log-domain offset, which is what makes features
    invariant to audio-front-end gain changes. t frames in, t-1 out.
    """
    feats = np.asarray(feats)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise InsufficientFramesError("delta transform needs at least 2 frames")
    return (feats[1:] - feats[:-1]).astype(np.float32)


def read_wav(path) -> AudioBuffer:
    """Read a RIFF WAV; only mono 16-bit PCM at 16 kHz is accepted."""
    try:
        with wave.open(str(path), "rb") as wav:
            if wav.getcomptype() != "NONE":
                raise UnsupportedFormatError(f"{path}: compressed WAV not supported")
            if wav.getsampwidth() != 2:
                raise UnsupportedFormatError(f"{path}: only 16-bit samples supported")
            if wav.getnchannels() != 1:
                raise UnsupportedFormatError(f"{path}: only mono audio supported")
            if wav.getframerate() != SAMPLE_RATE:
                raise UnsupportedRateError(
                    f"{path}: expected {SAMPLE_RATE} Hz, got {wav.getframerate()}"
                )
            data = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormatError(f"{path}: not a readable WAV ({exc})") from exc
    return AudioBuffer(samples=np.frombuffer(data, dtype="<i2"))


def write_wav(path, samples: np.ndarray) -> None:
    """Write mono 16-bit PCM at 16 kHz."""
    samples = np.asarray(samples, dtype="<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(SAMPLE_RATE)
        wav.writeframes(samples.tobytes())
