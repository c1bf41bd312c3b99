"""Declarative model configs, receptive-field math, and footprint accounting.

A ModelConfig is an ordered list of layer specs plus the input geometry.
Configs are immutable, JSON-serializable (schema version 1, shared with
the trainer), and every operation here is pure.

Multiply counting convention: one multiply per scalar product inside a
weighted contraction (conv taps, dense/GRU/attention matrix products) plus
one per element for the batch-norm scale. Activations, softmax, the
attention score divisor, and the GRU's elementwise gate products are not
counted. Multiply-accumulate counts as a single multiply.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .errors import ConfigError, FrontEndTooDeepError, UnknownModelError

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ConvSpec:
    kind = "conv"
    kernel: tuple[int, int]  # (time, freq)
    stride: tuple[int, int]
    in_channels: int
    out_channels: int


@dataclass(frozen=True)
class BatchNormSpec:
    kind = "batchnorm"
    channels: int
    activation: str | None = None


@dataclass(frozen=True)
class DeltaSpec:
    """Frame differencing on the raw feature grid; t frames become t-1."""

    kind = "delta"


@dataclass(frozen=True)
class FlattenSpec:
    """Merge freq x chan per timestep; collapse_time also merges time (CNN/DNN style)."""

    kind = "flatten"
    collapse_time: bool = False


@dataclass(frozen=True)
class GruSpec:
    kind = "gru"
    input_dim: int
    hidden_dim: int


@dataclass(frozen=True)
class AttentionSpec:
    kind = "attention"
    dim: int
    scale: str = "dim"  # "dim" divides scores by d, "sqrt" by sqrt(d)


@dataclass(frozen=True)
class SumTimeSpec:
    kind = "sum_time"


@dataclass(frozen=True)
class DenseSpec:
    kind = "dense"
    in_dim: int
    out_dim: int
    activation: str | None = None


LayerSpec = (
    ConvSpec
    | BatchNormSpec
    | DeltaSpec
    | FlattenSpec
    | GruSpec
    | AttentionSpec
    | SumTimeSpec
    | DenseSpec
)

_SPEC_KINDS = {
    cls.kind: cls
    for cls in (ConvSpec, BatchNormSpec, DeltaSpec, FlattenSpec, GruSpec,
                AttentionSpec, SumTimeSpec, DenseSpec)
}


@dataclass(frozen=True)
class ModelConfig:
    name: str
    input_frames: int
    input_bins: int
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))


def layer_names(config: ModelConfig) -> list[str]:
    """Stable per-layer names: conv1.., bn1.., fc1.., gru, attention, ..."""
    counters = {"conv": 0, "batchnorm": 0, "dense": 0}
    names = []
    for layer in config.layers:
        kind = layer.kind
        if kind == "conv":
            counters["conv"] += 1
            names.append(f"conv{counters['conv']}")
        elif kind == "batchnorm":
            counters["batchnorm"] += 1
            names.append(f"bn{counters['batchnorm']}")
        elif kind == "dense":
            counters["dense"] += 1
            names.append(f"fc{counters['dense']}")
        else:
            names.append(kind)
    return names


def _conv_out(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


def infer_shapes(config: ModelConfig) -> list[tuple[int, ...]]:
    """Shape after each layer, starting from (t, f, 1). Raises ConfigError."""
    shape: tuple[int, ...] = (config.input_frames, config.input_bins, 1)
    shapes = []
    for name, layer in zip(layer_names(config), config.layers):
        if isinstance(layer, DeltaSpec):
            if len(shape) != 3 or shape[0] < 2:
                raise ConfigError(f"{name}: needs >=2 frames of (t,f,c) input, got {shape}")
            shape = (shape[0] - 1, shape[1], shape[2])
        elif isinstance(layer, ConvSpec):
            if len(shape) != 3:
                raise ConfigError(f"{name}: conv needs (t,f,c) input, got {shape}")
            t, f, c = shape
            (kt, kf), (st, sf) = layer.kernel, layer.stride
            if c != layer.in_channels:
                raise ConfigError(f"{name}: expects {layer.in_channels} channels, got {c}")
            if t < kt or f < kf:
                raise ConfigError(f"{name}: kernel {kt}x{kf} larger than input {t}x{f}")
            shape = (_conv_out(t, kt, st), _conv_out(f, kf, sf), layer.out_channels)
        elif isinstance(layer, BatchNormSpec):
            if shape[-1] != layer.channels:
                raise ConfigError(f"{name}: expects {layer.channels} channels, got {shape[-1]}")
        elif isinstance(layer, FlattenSpec):
            if len(shape) != 3:
                raise ConfigError(f"{name}: flatten needs (t,f,c) input, got {shape}")
            t, f, c = shape
            shape = (t * f * c,) if layer.collapse_time else (t, f * c)
        elif isinstance(layer, GruSpec):
            if len(shape) != 2 or shape[1] != layer.input_dim:
                raise ConfigError(
                    f"{name}: needs (t, {layer.input_dim}) input, got {shape}"
                )
            shape = (shape[0], layer.hidden_dim)
        elif isinstance(layer, AttentionSpec):
            if len(shape) != 2 or shape[1] != layer.dim:
                raise ConfigError(f"{name}: needs (t, {layer.dim}) input, got {shape}")
        elif isinstance(layer, SumTimeSpec):
            if len(shape) != 2:
                raise ConfigError(f"{name}: needs (t, d) input, got {shape}")
            shape = (shape[1],)
        elif isinstance(layer, DenseSpec):
            if len(shape) != 1 or shape[0] != layer.in_dim:
                raise ConfigError(f"{name}: needs ({layer.in_dim},) input, got {shape}")
            shape = (layer.out_dim,)
        else:
            raise ConfigError(f"{name}: unknown layer kind")
        shapes.append(shape)
    return shapes


def validate_config(config: ModelConfig) -> None:
    """Full structural check; CRNNs must keep at least 2 conv timesteps."""
    if config.input_frames < 1 or config.input_bins < 1:
        raise ConfigError("input geometry must be positive")
    shapes = infer_shapes(config)
    if shapes and shapes[-1] != (1,):
        raise ConfigError(f"model must end in a single posterior unit, got {shapes[-1]}")
    names = layer_names(config)
    if len(set(names)) != len(names):
        raise ConfigError("layers sharing a name (stacked gru/attention) are unsupported")
    kinds = [layer.kind for layer in config.layers]
    if "gru" in kinds:
        gru_shape = shapes[kinds.index("gru")]
        if gru_shape[0] < 2:
            raise ConfigError(f"recurrent stack sees only {gru_shape[0]} timestep(s)")
        if kinds.count("flatten") != 1:
            raise ConfigError("recurrent configs need exactly one flatten before the GRU")


def has_conv_front_end(config: ModelConfig) -> bool:
    return any(layer.kind in ("conv", "delta") for layer in config.layers)


def receptive_field(config: ModelConfig) -> tuple[int, int, int]:
    """(rf_frames, stride_frames, out_timesteps) of the conv front end.

    rf = 1 + sum_i (kt_i - 1) * prod_{j<i} st_j over the time axis;
    the delta layer counts as a 2-tap, stride-1 time conv.
    """
    if not has_conv_front_end(config):
        raise ConfigError(f"{config.name}: no conv front end")
    rf = 1
    stride = 1
    for layer in config.layers:
        if isinstance(layer, DeltaSpec):
            kt, st = 2, 1
        elif isinstance(layer, ConvSpec):
            kt, st = layer.kernel[0], layer.stride[0]
        elif isinstance(layer, FlattenSpec):
            break
        else:
            continue
        rf += (kt - 1) * stride
        stride *= st
    t = config.input_frames
    if rf > t:
        raise FrontEndTooDeepError(f"receptive field {rf} exceeds input length {t}")
    steps = (t - rf) // stride + 1
    return rf, stride, steps


def sliding_stride(config: ModelConfig) -> int:
    """Input-frame advance between consecutive posteriors (1 if no conv)."""
    if not has_conv_front_end(config):
        return 1
    return receptive_field(config)[1]


@dataclass(frozen=True)
class LayerFootprint:
    name: str
    kind: str
    parameters: int
    biases: int
    multiplies: int


@dataclass(frozen=True)
class FootprintReport:
    """Parameter and multiply totals with a per-layer breakdown.

    Multiplies are for a single inference over the configured input window.
    """

    parameters: int
    multiplies: int
    bias_parameters: int
    layers: tuple[LayerFootprint, ...]


def footprint(config: ModelConfig) -> FootprintReport:
    shapes = infer_shapes(config)
    rows = []
    for name, layer, out_shape in zip(layer_names(config), config.layers, shapes):
        params = biases = mults = 0
        if isinstance(layer, ConvSpec):
            kt, kf = layer.kernel
            taps = kt * kf * layer.in_channels
            params = taps * layer.out_channels + layer.out_channels
            biases = layer.out_channels
            out_t, out_f, _ = out_shape
            mults = out_t * out_f * layer.out_channels * taps
        elif isinstance(layer, BatchNormSpec):
            params = 2 * layer.channels  # gamma, beta; running stats untrained
            biases = layer.channels
            mults = 1
            for dim in out_shape:
                mults *= dim
        elif isinstance(layer, GruSpec):
            n, d = layer.input_dim, layer.hidden_dim
            params = 3 * (d * (n + d) + d)
            biases = 3 * d
            mults = out_shape[0] * 3 * (d * n + d * d)
        elif isinstance(layer, AttentionSpec):
            d = layer.dim
            steps = out_shape[0]
            params = 3 * (d * d + d)
            biases = 3 * d
            mults = 3 * steps * d * d + 2 * steps * steps * d
        elif isinstance(layer, DenseSpec):
            params = layer.in_dim * layer.out_dim + layer.out_dim
            biases = layer.out_dim
            mults = layer.in_dim * layer.out_dim
        rows.append(LayerFootprint(name, layer.kind, params, biases, mults))
    return FootprintReport(
        parameters=sum(r.parameters for r in rows),
        multiplies=sum(r.multiplies for r in rows),
        bias_parameters=sum(r.biases for r in rows),
        layers=tuple(rows),
    )


def count_parameters(config: ModelConfig) -> FootprintReport:
    return footprint(config)


def count_multiplies(config: ModelConfig) -> FootprintReport:
    return footprint(config)


# --- JSON config schema (shared with the trainer) ---


def config_to_dict(config: ModelConfig) -> dict:
    layers = []
    for layer in config.layers:
        entry = {"kind": layer.kind}
        for f in fields(layer):
            value = getattr(layer, f.name)
            if isinstance(value, tuple):
                value = list(value)
            entry[f.name] = value
        layers.append(entry)
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "name": config.name,
        "input_frames": config.input_frames,
        "input_bins": config.input_bins,
        "layers": layers,
    }


def config_from_dict(data: dict) -> ModelConfig:
    try:
        version = data["schema_version"]
        if version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema version {version}")
        layers = []
        for entry in data["layers"]:
            entry = dict(entry)
            kind = entry.pop("kind")
            cls = _SPEC_KINDS.get(kind)
            if cls is None:
                raise ConfigError(f"unknown layer kind {kind!r}")
            for key, value in entry.items():
                if isinstance(value, list):
                    entry[key] = tuple(value)
            layers.append(cls(**entry))
        config = ModelConfig(
            name=data["name"],
            input_frames=data["input_frames"],
            input_bins=data["input_bins"],
            layers=tuple(layers),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    validate_config(config)
    return config


def config_to_json(config: ModelConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


def config_from_json(text: str) -> ModelConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


# --- Reference zoo ---


def _conv_bn(kernel, stride, c_in, c_out):
    return [
        ConvSpec(kernel=kernel, stride=stride, in_channels=c_in, out_channels=c_out),
        BatchNormSpec(channels=c_out, activation="relu"),
    ]


def _crnn_tail(n, d=64):
    return [
        FlattenSpec(collapse_time=False),
        GruSpec(input_dim=n, hidden_dim=d),
        AttentionSpec(dim=d),
        SumTimeSpec(),
        DenseSpec(in_dim=d, out_dim=32, activation="relu"),
        DenseSpec(in_dim=32, out_dim=1, activation="sigmoid"),
    ]


def _crnn_250k_layers():
    return (
        _conv_bn((8, 10), (2, 2), 1, 32)
        + _conv_bn((5, 7), (2, 2), 32, 32)
        + _conv_bn((4, 5), (2, 2), 32, 128)
    )


def _build_crnn_239k():
    return ModelConfig("CRNN-239k", 100, 64, tuple(_crnn_250k_layers() + _crnn_tail(512)))


def _build_crnn_183k():
    layers = (
        _crnn_250k_layers()
        + _conv_bn((2, 1), (2, 1), 128, 32)  # extra downsampler to cut GRU load
        + _crnn_tail(128)
    )
    return ModelConfig("CRNN-183k", 100, 64, tuple(layers))


def _build_delta_crnn_239k():
    layers = [DeltaSpec()] + _crnn_250k_layers() + _crnn_tail(512)
    return ModelConfig("Delta-LFBE-CRNN-239k", 101, 64, tuple(layers))


def _crnn_50k_layers(c2, c3):
    return (
        _conv_bn((8, 5), (2, 2), 1, 16)
        + _conv_bn((5, 3), (2, 2), 16, c2)
        + _conv_bn((4, 3), (2, 1), c2, c3)
    )


def _build_crnn_58k():
    return ModelConfig("CRNN-58k", 100, 20, tuple(_crnn_50k_layers(16, 64) + _crnn_tail(64)))


def _build_crnn_89k():
    return ModelConfig("CRNN-89k", 100, 20, tuple(_crnn_50k_layers(20, 128) + _crnn_tail(128)))


def _build_cnn_263k():
    layers = (
        _conv_bn((8, 10), (4, 2), 1, 32)
        + _conv_bn((5, 7), (2, 2), 32, 32)
        + [
            FlattenSpec(collapse_time=True),
            DenseSpec(in_dim=3520, out_dim=64, activation="relu"),
            DenseSpec(in_dim=64, out_dim=32, activation="relu"),
            DenseSpec(in_dim=32, out_dim=1, activation="sigmoid"),
        ]
    )
    return ModelConfig("CNN-263k", 100, 64, tuple(layers))


def _build_cnn_28k():
    layers = (
        _conv_bn((3, 3), (1, 1), 1, 16)
        + _conv_bn((3, 3), (2, 2), 16, 16)
        + _conv_bn((3, 3), (1, 1), 16, 24)
        + _conv_bn((3, 3), (2, 1), 24, 32)
        + _conv_bn((3, 3), (2, 1), 32, 48)
        + [
            FlattenSpec(collapse_time=True),
            DenseSpec(in_dim=960, out_dim=1, activation="sigmoid"),
        ]
    )
    return ModelConfig("CNN-28k", 100, 20, tuple(layers))


def _dnn(name, widths):
    layers = [FlattenSpec(collapse_time=True)]
    dims = [2000] + widths + [1]
    for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        last = i == len(dims) - 2
        layers.append(DenseSpec(in_dim=n_in, out_dim=n_out,
                                activation="sigmoid" if last else "relu"))
    return ModelConfig(name, 100, 20, tuple(layers))


def _build_dnn_233k():
    return _dnn("DNN-233k", [107, 64, 64, 64, 64])


def _build_dnn_51k():
    return _dnn("DNN-51k", [24, 24, 24, 24, 24])


_ZOO = {
    "CRNN-239k": _build_crnn_239k,
    "CRNN-183k": _build_crnn_183k,
    "Delta-LFBE-CRNN-239k": _build_delta_crnn_239k,
    "CRNN-89k": _build_crnn_89k,
    "CRNN-58k": _build_crnn_58k,
    "CNN-263k": _build_cnn_263k,
    "CNN-28k": _build_cnn_28k,
    "DNN-233k": _build_dnn_233k,
    "DNN-51k": _build_dnn_51k,
}


def reference_names() -> list[str]:
    return list(_ZOO)


def reference_config(name: str) -> ModelConfig:
    try:
        builder = _ZOO[name]
    except KeyError:
        raise UnknownModelError(
            f"unknown model {name!r}; known: {', '.join(_ZOO)}"
        ) from None
    config = builder()
    validate_config(config)
    return config


def budget_from_name(name: str) -> int:
    """Parameter budget encoded in a zoo name's trailing -<n>k."""
    tail = name.rsplit("-", 1)[-1]
    if not tail.endswith("k"):
        raise UnknownModelError(f"{name!r} has no -<n>k budget suffix")
    return int(float(tail[:-1]) * 1000)
