"""Training loop: engine config in, engine-loadable weight container out."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import torch

from .features import logmel
from .model import KwsModel
from .wkwd import read_container, write_container


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainRun:
    weights_in: str  # engine container supplying the config (and optionally init)
    manifest: str
    out_path: str
    steps: int = 2000
    batch_size: int = 32
    learning_rate: float = 1e-3
    dropout: float = 0.3
    seed: int = 0
    val_fraction: float = 0.25
    init_from_weights: bool = False


def read_wav_samples(path) -> np.ndarray:
    import wave

    with wave.open(str(path), "rb") as fh:
        if fh.getframerate() != 16000 or fh.getnchannels() != 1 or fh.getsampwidth() != 2:
            raise ValueError(f"{path}: need mono 16-bit 16 kHz WAV")
        return np.frombuffer(fh.readframes(fh.getnframes()), dtype="<i2")


def load_dataset(manifest_path, num_bins: int, frames: int):
    """Features (N, frames, bins), labels (N,), and per-entry records."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    feats, labels, records = [], [], []
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            wav = record["path"]
            if not os.path.isabs(wav):
                wav = os.path.join(base, wav)
            grid = logmel(read_wav_samples(wav), num_bins)
            if grid.shape[0] < frames:
                raise ValueError(f"{wav}: {grid.shape[0]} frames, model wants {frames}")
            feats.append(grid[:frames])
            labels.append(1.0 if record["label"] == "positive" else 0.0)
            records.append(record)
    return np.stack(feats), np.asarray(labels, dtype=np.float32), records


def auc_score(pos, neg) -> float:
    """Rank-based AUC (ties count half)."""
    pos = np.asarray(pos)
    neg = np.asarray(neg)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need both positive and negative scores")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((wins + 0.5 * ties) / (pos.size * neg.size))


def train_and_export(run: TrainRun) -> dict:
    """Train per the run settings and export an engine-loadable container.

    Returns summary stats including held-out AUC.
    """
    torch.manual_seed(run.seed)
    config, init_tensors = read_container(run.weights_in)
    model = KwsModel(config, dropout=run.dropout)
    if run.init_from_weights:
        model.load_tensors(init_tensors)

    feats, labels, _ = load_dataset(run.manifest, config["input_bins"], config["input_frames"])
    rng = np.random.default_rng(run.seed)
    order = rng.permutation(len(labels))
    n_val = max(2, int(run.val_fraction * len(labels)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) < run.batch_size // 2:
        raise ValueError("dataset too small for the requested batch size")

    x_train = torch.from_numpy(feats[train_idx])
    y_train = torch.from_numpy(labels[train_idx])
    optimizer = torch.optim.Adam(model.parameters(), lr=run.learning_rate)
    loss_fn = torch.nn.BCEWithLogitsLoss()

    model.train()
    last_loss = float("nan")
    for step in range(run.steps):
        batch = torch.from_numpy(rng.integers(0, len(train_idx), size=run.batch_size))
        logits = model(x_train[batch])
        loss = loss_fn(logits, y_train[batch])
        if not torch.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became {loss.item()} at step {step} "
                f"(lr={run.learning_rate}, batch={run.batch_size})"
            )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        last_loss = float(loss.item())

    model.eval()
    with torch.no_grad():
        val_scores = model.posterior(torch.from_numpy(feats[val_idx])).numpy()
        train_scores = model.posterior(x_train).numpy()
    val_labels = labels[val_idx]
    stats = {
        "steps": run.steps,
        "final_loss": last_loss,
        "train_auc": auc_score(train_scores[y_train.numpy() == 1.0],
                               train_scores[y_train.numpy() == 0.0]),
        "val_auc": auc_score(val_scores[val_labels == 1.0], val_scores[val_labels == 0.0]),
        "out_path": run.out_path,
    }
    write_container(run.out_path, config, model.export_tensors())
    return stats
