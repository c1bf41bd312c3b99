"""Shared builders: tiny configs, random weights, synthetic audio."""

from __future__ import annotations

import numpy as np
import pytest

from kwspot.models import (
    AttentionSpec,
    BatchNormSpec,
    ConvSpec,
    DeltaSpec,
    DenseSpec,
    FlattenSpec,
    GruSpec,
    ModelConfig,
    SumTimeSpec,
    infer_shapes,
    validate_config,
)
from kwspot.network import Network
from kwspot.weights import random_weights


def make_tiny_crnn(
    name="tiny",
    bins=6,
    convs=(((3, 3), (2, 2), 2),),
    gru_dim=4,
    steps=3,
    with_delta=False,
    head_hidden=None,
    attention_scale="dim",
):
    """A small CRNN whose input length is sized to give `steps` conv timesteps."""
    layers = [DeltaSpec()] if with_delta else []
    c_in = 1
    f = bins
    rf, stride = (2, 1) if with_delta else (1, 1)
    for (kt, kf), (st, sf), c_out in convs:
        layers.append(ConvSpec(kernel=(kt, kf), stride=(st, sf), in_channels=c_in, out_channels=c_out))
        layers.append(BatchNormSpec(channels=c_out, activation="relu"))
        rf += (kt - 1) * stride
        stride *= st
        f = (f - kf) // sf + 1
        c_in = c_out
    t = rf + stride * (steps - 1)
    n = f * c_in
    layers.append(FlattenSpec(collapse_time=False))
    layers.append(GruSpec(input_dim=n, hidden_dim=gru_dim))
    layers.append(AttentionSpec(dim=gru_dim, scale=attention_scale))
    layers.append(SumTimeSpec())
    if head_hidden:
        layers.append(DenseSpec(in_dim=gru_dim, out_dim=head_hidden, activation="relu"))
        layers.append(DenseSpec(in_dim=head_hidden, out_dim=1, activation="sigmoid"))
    else:
        layers.append(DenseSpec(in_dim=gru_dim, out_dim=1, activation="sigmoid"))
    config = ModelConfig(name, t, bins, tuple(layers))
    validate_config(config)
    return config


def random_tiny_config(rng: np.random.Generator) -> ModelConfig:
    """Random small CRNN/CNN/DNN config that passes the shape check."""
    family = rng.choice(["crnn", "cnn", "dnn"])
    bins = int(rng.integers(3, 8))
    if family == "dnn":
        t = int(rng.integers(2, 8))
        widths = [int(rng.integers(2, 6)) for _ in range(int(rng.integers(1, 3)))]
        layers = [FlattenSpec(collapse_time=True)]
        dims = [t * bins] + widths + [1]
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            act = "sigmoid" if i == len(dims) - 2 else "relu"
            layers.append(DenseSpec(in_dim=a, out_dim=b, activation=act))
        return ModelConfig("rand-dnn", t, bins, tuple(layers))

    convs = []
    f = bins
    n_convs = int(rng.integers(1, 3))
    c_in = 1
    for _ in range(n_convs):
        kf = int(rng.integers(1, min(3, f) + 1))
        sf = int(rng.integers(1, 3))
        kt = int(rng.integers(1, 4))
        st = int(rng.integers(1, 3))
        c_out = int(rng.integers(1, 4))
        convs.append(((kt, kf), (st, sf), c_out))
        f = (f - kf) // sf + 1
        c_in = c_out
    if family == "cnn":
        layers = []
        c_in = 1
        rf, stride = 1, 1
        for (kt, kf), (st, sf), c_out in convs:
            layers.append(ConvSpec((kt, kf), (st, sf), c_in, c_out))
            if rng.random() < 0.5:
                layers.append(BatchNormSpec(channels=c_out, activation="relu"))
            rf += (kt - 1) * stride
            stride *= st
            c_in = c_out
        steps = int(rng.integers(1, 4))
        t = rf + stride * (steps - 1)
        config = ModelConfig("rand-cnn", t, bins, tuple(layers))
        flat = 1
        for dim in infer_shapes(config)[-1]:
            flat *= dim
        layers = list(config.layers) + [
            FlattenSpec(collapse_time=True),
            DenseSpec(in_dim=flat, out_dim=1, activation="sigmoid"),
        ]
        return ModelConfig("rand-cnn", t, bins, tuple(layers))

    return make_tiny_crnn(
        name="rand-crnn",
        bins=bins,
        convs=convs,
        gru_dim=int(rng.integers(1, 6)),
        steps=int(rng.integers(2, 5)),
        with_delta=bool(rng.random() < 0.3),
        head_hidden=int(rng.integers(2, 5)) if rng.random() < 0.5 else None,
    )


def build_network(config: ModelConfig, seed=0) -> Network:
    return Network(config, random_weights(config, seed))


def random_features(rng: np.random.Generator, frames: int, bins: int) -> np.ndarray:
    return rng.normal(0.0, 1.0, size=(frames, bins)).astype(np.float32)


def random_pcm(rng: np.random.Generator, num_samples: int, amplitude=2000) -> np.ndarray:
    noise = rng.normal(0.0, amplitude, size=num_samples)
    return np.clip(noise, -32768, 32767).astype(np.int16)


def tone(num_samples: int, freq_hz: float, amplitude: float, rate=16000) -> np.ndarray:
    t = np.arange(num_samples) / rate
    return np.round(amplitude * np.sin(2 * np.pi * freq_hz * t)).astype(np.int16)


def chunked(rng: np.random.Generator, data, max_chunk: int):
    """Split a sequence into random-size chunks."""
    out = []
    i = 0
    while i < len(data):
        n = int(rng.integers(1, max_chunk + 1))
        out.append(data[i : i + n])
        i += n
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
