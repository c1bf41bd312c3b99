"""Single-file weight container and the WeightSet it loads into.

File layout (all integers little-endian):

    bytes 0-3    magic "WKWD"
    bytes 4-7    format_version, u32 (currently 1)
    bytes 8-11   header_len, u32
    header       UTF-8 JSON: {"schema_version", "config", "tensors"}
                 where tensors is an ordered list of
                 {"name", "shape", "offset"} descriptors
    payload      raw float32 little-endian tensor data, row-major,
                 concatenated in descriptor order; offsets are bytes
                 from payload start

The header JSON is serialized canonically (sorted keys, no whitespace),
so save -> load -> save round-trips byte-identically.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    HeaderError,
    TensorMismatchError,
    TruncatedFileError,
)
from .models import ModelConfig, config_from_dict, config_to_dict, infer_shapes, layer_names

MAGIC = b"WKWD"
FORMAT_VERSION = 1
WEIGHT_SCHEMA_VERSION = 1

_PREFIX = struct.Struct("<4sII")


def required_tensors(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) list for a config; also the on-disk order."""
    shapes = infer_shapes(config)
    out = []
    for name, layer, out_shape in zip(layer_names(config), config.layers, shapes):
        kind = layer.kind
        if kind == "conv":
            kt, kf = layer.kernel
            out.append((f"{name}.kernel", (kt, kf, layer.in_channels, layer.out_channels)))
            out.append((f"{name}.bias", (layer.out_channels,)))
        elif kind == "batchnorm":
            c = (layer.channels,)
            out.extend([(f"{name}.gamma", c), (f"{name}.beta", c),
                        (f"{name}.mean", c), (f"{name}.var", c)])
        elif kind == "gru":
            n, d = layer.input_dim, layer.hidden_dim
            for gate in ("z", "r", "h"):
                out.append((f"{name}.w{gate}", (d, n)))
                out.append((f"{name}.u{gate}", (d, d)))
                out.append((f"{name}.b{gate}", (d,)))
        elif kind == "attention":
            d = layer.dim
            for part in ("q", "k", "v"):
                out.append((f"{name}.w{part}", (d, d)))
                out.append((f"{name}.b{part}", (d,)))
        elif kind == "dense":
            out.append((f"{name}.weight", (layer.out_dim, layer.in_dim)))
            out.append((f"{name}.bias", (layer.out_dim,)))
    return out


@dataclass(frozen=True)
class WeightSet:
    """Tensors keyed "layer.param", validated against a ModelConfig."""

    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        fixed = {
            name: np.ascontiguousarray(t, dtype=np.float32)
            for name, t in self.tensors.items()
        }
        object.__setattr__(self, "tensors", fixed)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def validate_against(self, config: ModelConfig) -> None:
        required = dict(required_tensors(config))
        missing = sorted(set(required) - set(self.tensors))
        extra = sorted(set(self.tensors) - set(required))
        if missing or extra:
            raise TensorMismatchError(
                f"{config.name}: missing tensors {missing}, unexpected {extra}"
            )
        for name, shape in required.items():
            have = self.tensors[name].shape
            if have != shape:
                raise TensorMismatchError(
                    f"{config.name}: tensor {name} has shape {have}, expected {shape}"
                )


def random_weights(config: ModelConfig, seed: int = 0) -> WeightSet:
    """Seeded uniform(-0.1, 0.1) weights for testing without a trainer.

    Batch-norm gamma and var are offset by +1 so the normalization stays
    well-conditioned and variances stay positive.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in required_tensors(config):
        t = rng.uniform(-0.1, 0.1, size=shape)
        if name.endswith((".gamma", ".var")):
            t = t + 1.0
        tensors[name] = t.astype(np.float32)
    return WeightSet(tensors)


def save_weights(config: ModelConfig, weights: WeightSet, path) -> None:
    weights.validate_against(config)
    descriptors = []
    chunks = []
    offset = 0
    for name, _ in required_tensors(config):
        data = weights[name].tobytes()
        descriptors.append({"name": name, "shape": list(weights[name].shape), "offset": offset})
        chunks.append(data)
        offset += len(data)
    header_obj = {
        "schema_version": WEIGHT_SCHEMA_VERSION,
        "config": config_to_dict(config),
        "tensors": descriptors,
    }
    header = json.dumps(header_obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)))
        fh.write(header)
        for chunk in chunks:
            fh.write(chunk)


def load_weights(path) -> tuple[ModelConfig, WeightSet]:
    """Parse and validate a weight container; errors are typed per failure."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _PREFIX.size:
        raise TruncatedFileError(f"{path}: {len(blob)} bytes is too short for a header")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise BadVersionError(f"{path}: unsupported format version {version}")
    header_end = _PREFIX.size + header_len
    if header_end > len(blob):
        raise TruncatedFileError(
            f"{path}: header claims {header_len} bytes, file has {len(blob) - _PREFIX.size}"
        )
    try:
        header = json.loads(blob[_PREFIX.size:header_end].decode("utf-8"))
        schema = header["schema_version"]
        config_dict = header["config"]
        descriptors = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise HeaderError(f"{path}: bad header ({exc})") from exc
    if schema != WEIGHT_SCHEMA_VERSION:
        raise BadVersionError(f"{path}: unsupported weight schema {schema}")
    config = config_from_dict(config_dict)

    payload = blob[header_end:]
    required = required_tensors(config)
    if not isinstance(descriptors, list) or len(descriptors) != len(required):
        raise TensorMismatchError(
            f"{path}: header declares {len(descriptors)} tensors, config needs {len(required)}"
        )
    tensors = {}
    expected_offset = 0
    for desc, (req_name, req_shape) in zip(descriptors, required):
        try:
            name, shape, offset = desc["name"], tuple(desc["shape"]), desc["offset"]
        except (KeyError, TypeError) as exc:
            raise HeaderError(f"{path}: malformed tensor descriptor {desc!r}") from exc
        if name != req_name or shape != req_shape:
            raise TensorMismatchError(
                f"{path}: tensor {name} {shape} where {req_name} {req_shape} expected"
            )
        if offset != expected_offset:
            raise TensorMismatchError(
                f"{path}: tensor {name} at offset {offset}, expected {expected_offset}"
            )
        size = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
        end = offset + size
        if end > len(payload):
            raise TruncatedFileError(
                f"{path}: payload ends inside tensor {name} "
                f"(need {end} bytes, have {len(payload)})"
            )
        tensors[name] = np.frombuffer(payload[offset:end], dtype="<f4").reshape(shape)
        expected_offset = end
    if expected_offset != len(payload):
        raise TensorMismatchError(
            f"{path}: {len(payload) - expected_offset} trailing payload bytes"
        )
    weights = WeightSet(tensors)
    weights.validate_against(config)
    return config, weights
