"""Reader/writer for the engine's weight container format.

Layout (little-endian): magic "WKWD", u32 format version (1), u32 header
length, canonical-JSON header {"schema_version", "config", "tensors"},
then raw float32 row-major tensor data concatenated in descriptor order.
Tensor names and their on-disk order are a pure function of the config,
re-derived here from the published schema.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"WKWD"
FORMAT_VERSION = 1
SCHEMA_VERSION = 1

_PREFIX = struct.Struct("<4sII")


def tensor_order(config: dict) -> list[tuple[str, tuple[int, ...]]]:
    """(name, shape) descriptors in on-disk order for a config dict."""
    out = []
    counters = {"conv": 0, "batchnorm": 0, "dense": 0}
    for layer in config["layers"]:
        kind = layer["kind"]
        if kind == "conv":
            counters["conv"] += 1
            name = f"conv{counters['conv']}"
            kt, kf = layer["kernel"]
            out.append((f"{name}.kernel", (kt, kf, layer["in_channels"], layer["out_channels"])))
            out.append((f"{name}.bias", (layer["out_channels"],)))
        elif kind == "batchnorm":
            counters["batchnorm"] += 1
            name = f"bn{counters['batchnorm']}"
            c = (layer["channels"],)
            out += [(f"{name}.gamma", c), (f"{name}.beta", c), (f"{name}.mean", c), (f"{name}.var", c)]
        elif kind == "gru":
            n, d = layer["input_dim"], layer["hidden_dim"]
            for gate in "zrh":
                out += [(f"gru.w{gate}", (d, n)), (f"gru.u{gate}", (d, d)), (f"gru.b{gate}", (d,))]
        elif kind == "attention":
            d = layer["dim"]
            for part in "qkv":
                out += [(f"attention.w{part}", (d, d)), (f"attention.b{part}", (d,))]
        elif kind == "dense":
            counters["dense"] += 1
            name = f"fc{counters['dense']}"
            out.append((f"{name}.weight", (layer["out_dim"], layer["in_dim"])))
            out.append((f"{name}.bias", (layer["out_dim"],)))
    return out


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ValueError(f"{path}: not a version-{FORMAT_VERSION} weight container")
    header = json.loads(blob[_PREFIX.size : _PREFIX.size + header_len].decode("utf-8"))
    config = header["config"]
    payload = blob[_PREFIX.size + header_len :]
    tensors = {}
    for desc in header["tensors"]:
        shape = tuple(desc["shape"])
        size = 4 * int(np.prod(shape, dtype=np.int64))
        start = desc["offset"]
        tensors[desc["name"]] = np.frombuffer(payload[start : start + size], dtype="<f4").reshape(shape)
    return config, tensors


def write_container(path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    descriptors = []
    chunks = []
    offset = 0
    for name, shape in tensor_order(config):
        tensor = np.ascontiguousarray(tensors[name], dtype="<f4")
        if tensor.shape != shape:
            raise ValueError(f"{name}: shape {tensor.shape}, expected {shape}")
        data = tensor.tobytes()
        descriptors.append({"name": name, "shape": list(shape), "offset": offset})
        chunks.append(data)
        offset += len(data)
    header_obj = {"schema_version": SCHEMA_VERSION, "config": config, "tensors": descriptors}
    header = json.dumps(header_obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)))
        fh.write(header)
        for chunk in chunks:
            fh.write(chunk)
