"""Forward-pass kernels: 2-D convolution, batch norm, GRU, attention, dense.

Everything is float32 in, float32 out, pure, and deterministic: the same
inputs always produce bitwise-identical outputs. Parameter containers are
frozen dataclasses, safe to share read-only across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidStatsError, ShapeError

F32 = np.float32
BN_EPS = 1e-5


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def relu(x):
    return np.maximum(x, 0.0)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def apply_activation(x, name):
    if name is None or name == "linear":
        return x
    if name == "relu":
        return relu(x)
    if name == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {name!r}")


def conv2d(x: np.ndarray, kernel: np.ndarray, stride=(1, 1), bias=None) -> np.ndarray:
    """Valid-padding 2-D cross-correlation over a (time, freq, chan) input.

    kernel is (kt, kf, c_in, c_out); output time length is
    floor((t - kt) / st) + 1, and likewise along frequency.
    """
    x = np.asarray(x, dtype=F32)
    kernel = np.asarray(kernel, dtype=F32)
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(f"conv2d wants (t,f,c) input and 4-D kernel, got {x.shape} / {kernel.shape}")
    kt, kf, c_in, c_out = kernel.shape
    t, f, c = x.shape
    if c != c_in:
        raise ShapeError(f"input has {c} channels, kernel expects {c_in}")
    if t < kt or f < kf:
        raise ShapeError(f"kernel {kt}x{kf} larger than input {t}x{f}")
    st, sf = stride
    windows = sliding_window_view(x, (kt, kf), axis=(0, 1))[::st, ::sf]
    out = np.einsum("tfckl,klcd->tfd", windows, kernel, optimize=True)
    if bias is not None:
        out = out + np.asarray(bias, dtype=F32)
    return np.ascontiguousarray(out, dtype=F32)


def batchnorm_inference(x, mean, var, gamma, beta, eps=BN_EPS):
    """(x - mean) / sqrt(var + eps) * gamma + beta, per channel (last axis)."""
    var = np.asarray(var, dtype=F32)
    if np.any(var < 0):
        raise InvalidStatsError("batch norm variance must be non-negative")
    scale = np.asarray(gamma, dtype=F32) / np.sqrt(var + F32(eps))
    return ((np.asarray(x, dtype=F32) - np.asarray(mean, dtype=F32)) * scale
            + np.asarray(beta, dtype=F32)).astype(F32)


@dataclass(frozen=True)
class GruParams:
    """One GRU layer: per-gate input map W (d,n), recurrent map U (d,d), bias b (d).

    Gate equations (single bias per gate):
        z = sigmoid(Wz x + Uz h + bz)
        r = sigmoid(Wr x + Ur h + br)
        c = tanh(Wh x + Uh (r * h) + bh)
        h' = (1 - z) * h + z * c
    """

    wz: np.ndarray
    uz: np.ndarray
    bz: np.ndarray
    wr: np.ndarray
    ur: np.ndarray
    br: np.ndarray
    wh: np.ndarray
    uh: np.ndarray
    bh: np.ndarray

    def __post_init__(self):
        d, n = self.wz.shape
        for name in ("wz", "wr", "wh"):
            if getattr(self, name).shape != (d, n):
                raise ShapeError(f"{name} must be {(d, n)}")
        for name in ("uz", "ur", "uh"):
            if getattr(self, name).shape != (d, d):
                raise ShapeError(f"{name} must be {(d, d)}")
        for name in ("bz", "br", "bh"):
            if getattr(self, name).shape != (d,):
                raise ShapeError(f"{name} must be {(d,)}")

    @property
    def input_dim(self) -> int:
        return self.wz.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.wz.shape[0]


def gru_cell(params: GruParams, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One GRU step. Works on single vectors (n,)/(d,) or batches (b,n)/(b,d)."""
    z = sigmoid(x @ params.wz.T + h @ params.uz.T + params.bz)
    r = sigmoid(x @ params.wr.T + h @ params.ur.T + params.br)
    c = np.tanh(x @ params.wh.T + (r * h) @ params.uh.T + params.bh)
    return ((1.0 - z) * h + z * c).astype(F32)


def gru_forward(params: GruParams, inputs: np.ndarray, h0: np.ndarray | None = None) -> np.ndarray:
    """Run the GRU over a (t, n) step sequence, returning all t hidden states.

    Stopping after j steps and resuming from the saved state reproduces
    the full run bitwise; streaming relies on that.
    """
    inputs = np.asarray(inputs, dtype=F32)
    if inputs.ndim != 2 or inputs.shape[1] != params.input_dim:
        raise ShapeError(
            f"inputs must be (t, {params.input_dim}), got {inputs.shape}"
        )
    h = np.zeros(params.hidden_dim, dtype=F32) if h0 is None else np.asarray(h0, dtype=F32)
    states = np.empty((inputs.shape[0], params.hidden_dim), dtype=F32)
    for i, x in enumerate(inputs):
        h = gru_cell(params, x, h)
        states[i] = h
    return states


@dataclass(frozen=True)
class AttentionParams:
    """Three d->d linear maps (with biases) producing query, key, value."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray

    def __post_init__(self):
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv"):
            if getattr(self, name).shape != (d, d):
                raise ShapeError(f"{name} must be square {(d, d)}")
        for name in ("bq", "bk", "bv"):
            if getattr(self, name).shape != (d,):
                raise ShapeError(f"{name} must be {(d,)}")

    @property
    def dim(self) -> int:
        return self.wq.shape[0]


def scaled_dot_attention(params: AttentionParams, seq: np.ndarray, scale: str = "dim") -> np.ndarray:
    """softmax(Q K^T / divisor) V over a (t, d) sequence.

    The divisor is d itself by default; scale="sqrt" switches to the
    conventional sqrt(d) for comparison.
    """
    seq = np.asarray(seq, dtype=F32)
    d = params.dim
    if seq.ndim != 2 or seq.shape[1] != d:
        raise ShapeError(f"sequence must be (t, {d}), got {seq.shape}")
    if scale == "dim":
        divisor = F32(d)
    elif scale == "sqrt":
        divisor = F32(np.sqrt(d))
    else:
        raise ValueError(f"unknown attention scale {scale!r}")
    q = seq @ params.wq.T + params.bq
    k = seq @ params.wk.T + params.bk
    v = seq @ params.wv.T + params.bv
    weights = softmax_rows(q @ k.T / divisor)
    return (weights @ v).astype(F32)


@dataclass(frozen=True)
class DenseParams:
    """Dense layer y = W x + b with an optional activation."""

    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str | None = None

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(f"dense weight/bias mismatch: {self.weight.shape} / {self.bias.shape}")


def dense(params: DenseParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=F32)
    if x.shape[-1] != params.weight.shape[1]:
        raise ShapeError(
            f"dense expects width {params.weight.shape[1]}, got {x.shape[-1]}"
        )
    y = x @ params.weight.T + params.bias
    return apply_activation(y, params.activation).astype(F32)


def attention_pool_and_classify(u: np.ndarray, head: list[DenseParams]) -> float:
    """Sum the attended sequence over time, run the dense head, return the posterior."""
    u = np.asarray(u, dtype=F32)
    if u.ndim != 2 or u.shape[0] < 1:
        raise ShapeError(f"need a nonempty (t, d) sequence, got {u.shape}")
    pooled = u.sum(axis=0)
    for layer in head:
        pooled = dense(layer, pooled)
    if pooled.shape != (1,):
        raise ShapeError(f"head must end in a single unit, got {pooled.shape}")
    return float(pooled[0])
