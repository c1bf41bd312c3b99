"""Dataset scoring and the false-accepts-at-fixed-miss-rate metric.

False accepts are counted per utterance: an utterance's score is the max
posterior over its sliding windows, and a negative utterance whose score
reaches the operating threshold is one false accept.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .detect import DetectionEvent, DetectorConfig, detect
from .errors import EvalAbortError, KwspotError, UndefinedThresholdError
from .frontend import compute_lfbe, read_wav
from .network import Network

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    start_ms: float | None = None
    end_ms: float | None = None

    def reference(self) -> tuple[float, float] | None:
        if self.start_ms is None or self.end_ms is None:
            return None
        return (self.start_ms, self.end_ms)


def load_manifest(path) -> list[ManifestEntry]:
    """JSON-lines manifest: {"path", "label", optional "start_ms"/"end_ms"}."""
    entries = []
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                wav = record["path"]
                label = record["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise KwspotError(f"{path}:{lineno}: bad manifest line ({exc})") from exc
            if label not in (POSITIVE, NEGATIVE):
                raise KwspotError(f"{path}:{lineno}: label must be positive|negative")
            if not os.path.isabs(wav):
                wav = os.path.join(base, wav)
            if not os.path.exists(wav):
                raise KwspotError(f"{path}:{lineno}: audio file not found: {wav}")
            entries.append(
                ManifestEntry(wav, label, record.get("start_ms"), record.get("end_ms"))
            )
    return entries


@dataclass
class ScoreSet:
    """Per-utterance max posteriors, split by label."""

    pos_scores: list[float] = field(default_factory=list)
    neg_scores: list[float] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


def utterance_features(network: Network, path) -> np.ndarray:
    """LFBE features for one file, zero-padded up to one model window."""
    feats = compute_lfbe(read_wav(path), network.config.input_bins)
    t = network.config.input_frames
    if feats.shape[0] < t:
        pad = np.full((t - feats.shape[0], feats.shape[1]), np.log(1e-10), dtype=np.float32)
        feats = np.concatenate([feats, pad])
    return feats


def score_utterance(network: Network, path) -> float:
    trace = network.sliding_posteriors(utterance_features(network, path))
    return max(sp.posterior for sp in trace)


def score_dataset(network: Network, manifest, max_failure_fraction=0.10) -> ScoreSet:
    """Max sliding-window posterior per utterance, aggregated in manifest order.

    Unreadable entries are recorded and skipped; more than 10% failures
    aborts the run.
    """
    manifest = list(manifest)
    scores = ScoreSet()
    for entry in manifest:
        try:
            value = score_utterance(network, entry.path)
        except KwspotError as exc:
            scores.failures.append(f"{entry.path}: {exc}")
            continue
        (scores.pos_scores if entry.label == POSITIVE else scores.neg_scores).append(value)
    if manifest and len(scores.failures) > max_failure_fraction * len(manifest):
        raise EvalAbortError(
            f"{len(scores.failures)}/{len(manifest)} utterances failed to score"
        )
    return scores


def fa_at_mr(scores: ScoreSet, mr: float = 0.15) -> tuple[int, float]:
    """(false_accepts, threshold) at a fixed miss rate.

    The threshold is the largest value at which at most an mr fraction of
    positives score strictly below it; scores equal to the threshold count
    as accepted. False accepts are negatives at or above the threshold.
    """
    pos = sorted(scores.pos_scores)
    if not pos:
        raise UndefinedThresholdError("no positive scores")
    allowed = math.floor(mr * len(pos))
    if allowed >= len(pos):
        threshold = math.inf
    else:
        threshold = pos[allowed]
    fa = sum(1 for s in scores.neg_scores if s >= threshold)
    return fa, threshold


@dataclass(frozen=True)
class DetPoint:
    miss_rate: float
    false_accepts: int
    threshold: float


def det_sweep(scores: ScoreSet, points: int | None = None) -> list[DetPoint]:
    """DET curve over the observed score values, sorted by threshold.

    Miss rate is non-decreasing and false accepts non-increasing along the
    sweep. points subsamples the curve evenly, always keeping endpoints.
    """
    pos = np.asarray(sorted(scores.pos_scores))
    neg = np.asarray(sorted(scores.neg_scores))
    if len(pos) == 0 and len(neg) == 0:
        return []
    thresholds = np.unique(np.concatenate([pos, neg]))
    sweep = []
    for thr in thresholds:
        mr = float(np.searchsorted(pos, thr, side="left")) / max(len(pos), 1)
        fa = int(len(neg) - np.searchsorted(neg, thr, side="left"))
        sweep.append(DetPoint(mr, fa, float(thr)))
    if points is not None and 0 < points < len(sweep):
        idx = np.unique(np.linspace(0, len(sweep) - 1, points).round().astype(int))
        sweep = [sweep[i] for i in idx]
    return sweep


@dataclass(frozen=True)
class EvalReport:
    miss_rate: float
    threshold: float
    false_accepts: int
    num_positive: int
    num_negative: int
    failures: list[str]


def evaluate_dataset(network: Network, manifest, mr: float = 0.15) -> EvalReport:
    scores = score_dataset(network, manifest)
    fa, threshold = fa_at_mr(scores, mr)
    return EvalReport(
        miss_rate=mr,
        threshold=threshold,
        false_accepts=fa,
        num_positive=len(scores.pos_scores),
        num_negative=len(scores.neg_scores),
        failures=scores.failures,
    )


def positive_events(
    network: Network, entry: ManifestEntry, threshold: float, hangover: int = 3
) -> list[DetectionEvent]:
    """Detection events for one utterance at a fixed threshold."""
    trace = network.sliding_posteriors(utterance_features(network, entry.path))
    if not 0.0 < threshold < 1.0:
        return []
    return detect(trace, DetectorConfig(threshold=threshold, hangover_steps=hangover))
