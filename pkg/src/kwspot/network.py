"""Binds a ModelConfig and WeightSet into a runnable forward pass.

The layer walk is split at the (non-collapsing) flatten: everything up to
and including it is the conv front end, everything after is the recurrent
tail. Streaming reuses both halves; offline inference walks straight
through. A Network is immutable after construction and safe to share.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .detect import StreamPosterior
from .errors import ConfigError, ShapeError
from .frontend import delta_lfbe
from .kernels import AttentionParams, DenseParams, GruParams
from .models import (
    ModelConfig,
    has_conv_front_end,
    layer_names,
    receptive_field,
    sliding_stride,
    validate_config,
)
from .weights import WeightSet


class ConvLayer:
    def __init__(self, spec, kernel, bias):
        self.spec = spec
        self.kernel = kernel
        self.bias = bias

    def __call__(self, x):
        return kernels.conv2d(x, self.kernel, self.spec.stride, self.bias)


class BatchNormLayer:
    def __init__(self, spec, gamma, beta, mean, var):
        self.spec = spec
        self.gamma, self.beta, self.mean, self.var = gamma, beta, mean, var

    def __call__(self, x):
        y = kernels.batchnorm_inference(x, self.mean, self.var, self.gamma, self.beta)
        return kernels.apply_activation(y, self.spec.activation)


class DeltaLayer:
    def __call__(self, x):
        if x.ndim == 3:
            if x.shape[2] != 1:
                raise ShapeError("delta layer expects a single input channel")
            return delta_lfbe(x[:, :, 0])[:, :, None]
        return delta_lfbe(x)[:, :, None]


class FlattenLayer:
    def __init__(self, spec):
        self.collapse_time = spec.collapse_time

    def __call__(self, x):
        if self.collapse_time:
            return x.reshape(-1)
        return x.reshape(x.shape[0], -1)


class GruLayer:
    def __init__(self, params: GruParams):
        self.params = params

    def __call__(self, x):
        return kernels.gru_forward(self.params, x)


class AttentionLayer:
    def __init__(self, spec, params: AttentionParams):
        self.params = params
        self.scale = spec.scale

    def __call__(self, x):
        return kernels.scaled_dot_attention(self.params, x, self.scale)


class SumTimeLayer:
    def __call__(self, x):
        return x.sum(axis=0).astype(np.float32)


class DenseLayer:
    def __init__(self, params: DenseParams):
        self.params = params

    def __call__(self, x):
        return kernels.dense(self.params, x)


def _build_layers(config: ModelConfig, weights: WeightSet):
    layers = []
    for name, spec in zip(layer_names(config), config.layers):
        kind = spec.kind
        if kind == "conv":
            layers.append(ConvLayer(spec, weights[f"{name}.kernel"], weights[f"{name}.bias"]))
        elif kind == "batchnorm":
            layers.append(BatchNormLayer(spec, weights[f"{name}.gamma"], weights[f"{name}.beta"],
                                         weights[f"{name}.mean"], weights[f"{name}.var"]))
        elif kind == "delta":
            layers.append(DeltaLayer())
        elif kind == "flatten":
            layers.append(FlattenLayer(spec))
        elif kind == "gru":
            params = GruParams(*(weights[f"{name}.{p}{g}"] for g in "zrh" for p in ("w", "u", "b")))
            layers.append(GruLayer(params))
        elif kind == "attention":
            params = AttentionParams(*(weights[f"{name}.{p}{part}"]
                                       for part in "qkv" for p in ("w", "b")))
            layers.append(AttentionLayer(spec, params))
        elif kind == "sum_time":
            layers.append(SumTimeLayer())
        elif kind == "dense":
            layers.append(DenseLayer(DenseParams(weights[f"{name}.weight"],
                                                 weights[f"{name}.bias"], spec.activation)))
        else:
            raise ConfigError(f"{name}: unknown layer kind {kind!r}")
    return layers


class Network:
    def __init__(self, config: ModelConfig, weights: WeightSet):
        validate_config(config)
        weights.validate_against(config)
        self.config = config
        self.layers = _build_layers(config, weights)
        self._split = None
        for i, spec in enumerate(config.layers):
            if spec.kind == "flatten" and not spec.collapse_time:
                self._split = i + 1
                break

    @property
    def is_recurrent(self) -> bool:
        return self._split is not None

    def forward(self, feats: np.ndarray) -> float:
        """Posterior for one full input window of (input_frames, input_bins)."""
        x = self._check_input(feats)
        for layer in self.layers:
            x = layer(x)
        return float(x[0])

    def conv_timesteps(self, feats: np.ndarray) -> np.ndarray:
        """Front-end half: features to the (t', f'*C) timestep sequence."""
        if not self.is_recurrent:
            raise ConfigError(f"{self.config.name} has no recurrent tail to split at")
        x = self._check_input(feats, window=False)
        for layer in self.layers[: self._split]:
            x = layer(x)
        return x

    def tail_posterior(self, timesteps: np.ndarray) -> float:
        """Recurrent half: (h, n) timesteps to a posterior."""
        x = np.asarray(timesteps, dtype=np.float32)
        for layer in self.layers[self._split:]:
            x = layer(x)
        return float(x[0])

    def tail_from_states(self, states: np.ndarray) -> float:
        """Attention + head on precomputed GRU hidden states (h, d)."""
        x = np.asarray(states, dtype=np.float32)
        start = self._split + 1  # skip the GRU itself
        for layer in self.layers[start:]:
            x = layer(x)
        return float(x[0])

    def gru_params(self) -> GruParams:
        for layer in self.layers:
            if isinstance(layer, GruLayer):
                return layer.params
        raise ConfigError(f"{self.config.name} has no GRU layer")

    def _check_input(self, feats, window=True):
        x = np.asarray(feats, dtype=np.float32)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[1] != self.config.input_bins or x.shape[2] != 1:
            raise ShapeError(
                f"expected (t, {self.config.input_bins}) features, got {feats.shape}"
            )
        if window and x.shape[0] != self.config.input_frames:
            raise ShapeError(
                f"expected exactly {self.config.input_frames} frames, got {x.shape[0]}"
            )
        return x

    def sliding_posteriors(self, feats: np.ndarray) -> list[StreamPosterior]:
        """Offline reference inference: one full forward pass per window.

        Windows are input_frames long and advance by the conv front end's
        frame stride, so the records line up one-to-one with what the
        streaming engine emits.
        """
        feats = np.asarray(feats, dtype=np.float32)
        t = self.config.input_frames
        k = sliding_stride(self.config)
        if has_conv_front_end(self.config):
            h = receptive_field(self.config)[2]
        else:
            h = 1
        out = []
        for start in range(0, feats.shape[0] - t + 1, k):
            posterior = self.forward(feats[start : start + t])
            out.append(
                StreamPosterior(
                    step=start // k + h,
                    first_frame=start,
                    last_frame=start + t - 1,
                    posterior=posterior,
                )
            )
        return out
