"""Torch model mirroring the engine's layer semantics exactly.

Conventions that differ from stock torch modules and are therefore
hand-rolled:

* GRU gates use a single bias each and apply the reset gate before the
  recurrent matrix: c = tanh(Wh x + Uh (r*h) + bh). torch.nn.GRU computes
  r*(Uh h + b) with two biases, which the engine cannot load.
* Attention scores divide by d (not sqrt(d)) unless the config says
  "sqrt".
* Flatten keeps time and merges (freq, channel) in that order, matching
  the engine's row-major reshape.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class GruLayer(nn.Module):
    def __init__(self, input_dim: int, hidden_dim: int):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        for gate in "zrh":
            setattr(self, f"w{gate}", nn.Parameter(torch.empty(hidden_dim, input_dim)))
            setattr(self, f"u{gate}", nn.Parameter(torch.empty(hidden_dim, hidden_dim)))
            setattr(self, f"b{gate}", nn.Parameter(torch.zeros(hidden_dim)))
        for gate in "zrh":
            nn.init.uniform_(getattr(self, f"w{gate}"), -0.1, 0.1)
            nn.init.uniform_(getattr(self, f"u{gate}"), -0.1, 0.1)

    def forward(self, x):  # (B, T, n) -> (B, T, d)
        batch = x.shape[0]
        h = x.new_zeros(batch, self.hidden_dim)
        states = []
        for t in range(x.shape[1]):
            xt = x[:, t]
            z = torch.sigmoid(xt @ self.wz.T + h @ self.uz.T + self.bz)
            r = torch.sigmoid(xt @ self.wr.T + h @ self.ur.T + self.br)
            c = torch.tanh(xt @ self.wh.T + (r * h) @ self.uh.T + self.bh)
            h = (1.0 - z) * h + z * c
            states.append(h)
        return torch.stack(states, dim=1)


class AttentionLayer(nn.Module):
    def __init__(self, dim: int, scale: str = "dim"):
        super().__init__()
        self.dim = dim
        self.divisor = float(dim) if scale == "dim" else float(np.sqrt(dim))
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)

    def forward(self, x):  # (B, T, d) -> (B, T, d)
        q, k, v = self.q(x), self.k(x), self.v(x)
        weights = torch.softmax(q @ k.transpose(1, 2) / self.divisor, dim=-1)
        return weights @ v


class KwsModel(nn.Module):
    """Built from an engine config dict; forward maps (B, t, f) to logits."""

    def __init__(self, config: dict, dropout: float = 0.0):
        super().__init__()
        self.config = config
        self.dropout = nn.Dropout(dropout)
        self.blocks = nn.ModuleList()
        self.kinds = []
        self.specs = []
        for layer in config["layers"]:
            kind = layer["kind"]
            if kind == "conv":
                kt, kf = layer["kernel"]
                st, sf = layer["stride"]
                self.blocks.append(
                    nn.Conv2d(layer["in_channels"], layer["out_channels"], (kt, kf), (st, sf))
                )
            elif kind == "batchnorm":
                self.blocks.append(nn.BatchNorm2d(layer["channels"], eps=1e-5))
            elif kind == "gru":
                self.blocks.append(GruLayer(layer["input_dim"], layer["hidden_dim"]))
            elif kind == "attention":
                self.blocks.append(AttentionLayer(layer["dim"], layer.get("scale", "dim")))
            elif kind == "dense":
                self.blocks.append(nn.Linear(layer["in_dim"], layer["out_dim"]))
            else:  # delta, flatten, sum_time carry no parameters
                self.blocks.append(nn.Identity())
            self.kinds.append(kind)
            self.specs.append(layer)
        if self.kinds[-1] != "dense" or self.specs[-1].get("activation") != "sigmoid":
            raise ValueError("config must end in a sigmoid dense head")

    def forward(self, feats):  # (B, t, f) -> logits (B,)
        x = feats.unsqueeze(1)  # (B, 1, t, f)
        last = len(self.blocks) - 1
        for i, (kind, spec, block) in enumerate(zip(self.kinds, self.specs, self.blocks)):
            if kind == "delta":
                x = x[:, :, 1:, :] - x[:, :, :-1, :]
            elif kind == "conv":
                x = block(x)
            elif kind == "batchnorm":
                x = block(x)
                if spec.get("activation") == "relu":
                    x = torch.relu(x)
            elif kind == "flatten":
                x = x.permute(0, 2, 3, 1)  # (B, t, f, C): merge f then C, like the engine
                if spec["collapse_time"]:
                    x = x.reshape(x.shape[0], -1)
                else:
                    x = x.reshape(x.shape[0], x.shape[1], -1)
                x = self.dropout(x)
            elif kind == "gru":
                x = block(x)
            elif kind == "attention":
                x = block(x)
            elif kind == "sum_time":
                x = x.sum(dim=1)
                x = self.dropout(x)
            elif kind == "dense":
                x = block(x)
                if i != last:
                    act = spec.get("activation")
                    if act == "relu":
                        x = torch.relu(x)
                    elif act == "sigmoid":
                        x = torch.sigmoid(x)
        return x.squeeze(-1)  # logits; the final sigmoid lives in the loss / posterior()

    def posterior(self, feats):
        return torch.sigmoid(self.forward(feats))

    # --- container interop ---

    def _named_blocks(self):
        counters = {"conv": 0, "batchnorm": 0, "dense": 0}
        for kind, block in zip(self.kinds, self.blocks):
            if kind == "conv":
                counters["conv"] += 1
                yield f"conv{counters['conv']}", kind, block
            elif kind == "batchnorm":
                counters["batchnorm"] += 1
                yield f"bn{counters['batchnorm']}", kind, block
            elif kind == "dense":
                counters["dense"] += 1
                yield f"fc{counters['dense']}", kind, block
            elif kind in ("gru", "attention"):
                yield kind, kind, block

    def export_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, kind, block in self._named_blocks():
            if kind == "conv":
                out[f"{name}.kernel"] = block.weight.detach().numpy().transpose(2, 3, 1, 0)
                out[f"{name}.bias"] = block.bias.detach().numpy()
            elif kind == "batchnorm":
                out[f"{name}.gamma"] = block.weight.detach().numpy()
                out[f"{name}.beta"] = block.bias.detach().numpy()
                out[f"{name}.mean"] = block.running_mean.detach().numpy()
                out[f"{name}.var"] = block.running_var.detach().numpy()
            elif kind == "gru":
                for gate in "zrh":
                    for part in "wub":
                        tensor = getattr(block, f"{part}{gate}")
                        out[f"gru.{part}{gate}"] = tensor.detach().numpy()
            elif kind == "attention":
                for part in "qkv":
                    linear = getattr(block, part)
                    out[f"attention.w{part}"] = linear.weight.detach().numpy()
                    out[f"attention.b{part}"] = linear.bias.detach().numpy()
            elif kind == "dense":
                out[f"{name}.weight"] = block.weight.detach().numpy()
                out[f"{name}.bias"] = block.bias.detach().numpy()
        return {k: np.ascontiguousarray(v, dtype=np.float32) for k, v in out.items()}

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        with torch.no_grad():
            for name, kind, block in self._named_blocks():
                if kind == "conv":
                    block.weight.copy_(torch.from_numpy(
                        tensors[f"{name}.kernel"].transpose(3, 2, 0, 1).copy()))
                    block.bias.copy_(torch.from_numpy(tensors[f"{name}.bias"].copy()))
                elif kind == "batchnorm":
                    block.weight.copy_(torch.from_numpy(tensors[f"{name}.gamma"].copy()))
                    block.bias.copy_(torch.from_numpy(tensors[f"{name}.beta"].copy()))
                    block.running_mean.copy_(torch.from_numpy(tensors[f"{name}.mean"].copy()))
                    block.running_var.copy_(torch.from_numpy(tensors[f"{name}.var"].copy()))
                elif kind == "gru":
                    for gate in "zrh":
                        for part in "wub":
                            getattr(block, f"{part}{gate}").copy_(
                                torch.from_numpy(tensors[f"gru.{part}{gate}"].copy()))
                elif kind == "attention":
                    for part in "qkv":
                        linear = getattr(block, part)
                        linear.weight.copy_(torch.from_numpy(tensors[f"attention.w{part}"].copy()))
                        linear.bias.copy_(torch.from_numpy(tensors[f"attention.b{part}"].copy()))
                elif kind == "dense":
                    block.weight.copy_(torch.from_numpy(tensors[f"{name}.weight"].copy()))
                    block.bias.copy_(torch.from_numpy(tensors[f"{name}.bias"].copy()))
