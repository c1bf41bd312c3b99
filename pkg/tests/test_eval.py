import json
import math

import numpy as np
import pytest

from kwspot.errors import EvalAbortError, KwspotError, UndefinedThresholdError
from kwspot.evaluate import (
    ManifestEntry,
    ScoreSet,
    det_sweep,
    fa_at_mr,
    load_manifest,
    score_dataset,
    score_utterance,
)
from kwspot.frontend import write_wav
from kwspot.models import DenseSpec, FlattenSpec, ModelConfig
from kwspot.network import Network
from kwspot.weights import WeightSet, random_weights

from conftest import build_network, make_tiny_crnn, random_pcm


def fa_at_mr_oracle(pos, neg, mr):
    """Exhaustive search over candidate thresholds."""
    best = None
    for thr in sorted(set(pos) | set(neg) | {0.0, 1.0, math.inf}):
        misses = sum(1 for p in pos if p < thr)
        if misses <= mr * len(pos):
            if best is None or thr > best:
                best = thr
    fa = sum(1 for n in neg if n >= best)
    return fa, best


class TestFaAtMr:
    def test_perfectly_separated_scores_have_zero_fas(self):
        scores = ScoreSet(pos_scores=[0.9, 0.8, 0.85], neg_scores=[0.1, 0.2, 0.3])
        fa, thr = fa_at_mr(scores, mr=0.15)
        assert fa == 0
        assert thr == 0.8

    def test_identical_scores_accept_every_negative(self):
        scores = ScoreSet(pos_scores=[0.5] * 10, neg_scores=[0.5] * 7)
        fa, thr = fa_at_mr(scores, mr=0.15)
        assert fa == 7
        assert thr == 0.5

    def test_worked_example(self):
        # computed with the exhaustive oracle and frozen: allowed misses
        # floor(0.15*10)=1, threshold is the second-smallest positive (0.1),
        # and all three negatives sit at or above it
        pos = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05]
        neg = [0.45, 0.25, 0.15]
        scores = ScoreSet(pos_scores=pos, neg_scores=neg)
        fa, thr = fa_at_mr(scores, mr=0.15)
        assert (fa, thr) == (3, 0.1)
        assert fa_at_mr_oracle(pos, neg, 0.15) == (3, 0.1)

    def test_matches_exhaustive_oracle_on_random_sets(self):
        rng = np.random.default_rng(99)
        for case in range(200):
            n_pos = int(rng.integers(1, 51))
            n_neg = int(rng.integers(0, 51))
            pos = list(np.round(rng.uniform(size=n_pos), 3))
            neg = list(np.round(rng.uniform(size=n_neg), 3))
            mr = float(rng.choice([0.0, 0.05, 0.15, 0.3, 0.5]))
            scores = ScoreSet(pos_scores=pos, neg_scores=neg)
            got = fa_at_mr(scores, mr=mr)
            want = fa_at_mr_oracle(pos, neg, mr)
            assert got == want, f"case {case}: {got} != {want}"

    def test_empty_positives_rejected(self):
        with pytest.raises(UndefinedThresholdError):
            fa_at_mr(ScoreSet(pos_scores=[], neg_scores=[0.5]))

    def test_full_miss_rate_allows_infinite_threshold(self):
        scores = ScoreSet(pos_scores=[0.4, 0.5], neg_scores=[0.9])
        fa, thr = fa_at_mr(scores, mr=1.0)
        assert fa == 0 and thr == math.inf


class TestDetSweep:
    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(5)
        scores = ScoreSet(
            pos_scores=list(rng.uniform(size=40)),
            neg_scores=list(rng.uniform(size=40)),
        )
        sweep = det_sweep(scores)
        mrs = [p.miss_rate for p in sweep]
        fas = [p.false_accepts for p in sweep]
        assert mrs == sorted(mrs)
        assert fas == sorted(fas, reverse=True)

    def test_lowest_threshold_has_zero_miss_rate(self):
        scores = ScoreSet(pos_scores=[0.6, 0.7], neg_scores=[0.2, 0.9])
        sweep = det_sweep(scores)
        assert sweep[0].threshold <= min(scores.pos_scores)
        assert sweep[0].miss_rate == 0.0

    def test_contains_the_fa_at_mr_operating_point(self):
        rng = np.random.default_rng(6)
        scores = ScoreSet(
            pos_scores=list(rng.uniform(size=30)),
            neg_scores=list(rng.uniform(size=25)),
        )
        fa, thr = fa_at_mr(scores, mr=0.15)
        sweep = det_sweep(scores)
        match = [p for p in sweep if p.threshold == thr]
        assert match and match[0].false_accepts == fa

    def test_every_point_matches_bruteforce_counting(self):
        rng = np.random.default_rng(7)
        pos = list(rng.uniform(size=15))
        neg = list(rng.uniform(size=12))
        for point in det_sweep(ScoreSet(pos_scores=pos, neg_scores=neg)):
            assert point.miss_rate == sum(1 for p in pos if p < point.threshold) / len(pos)
            assert point.false_accepts == sum(1 for n in neg if n >= point.threshold)

    def test_points_subsampling_keeps_endpoints(self):
        rng = np.random.default_rng(8)
        scores = ScoreSet(
            pos_scores=list(rng.uniform(size=50)),
            neg_scores=list(rng.uniform(size=50)),
        )
        full = det_sweep(scores)
        small = det_sweep(scores, points=5)
        assert len(small) == 5
        assert small[0] == full[0] and small[-1] == full[-1]


def always_fire_network():
    config = ModelConfig(
        "always", 100, 4,
        (FlattenSpec(collapse_time=True), DenseSpec(400, 1, "sigmoid")),
    )
    tensors = {
        "fc1.weight": np.zeros((1, 400), dtype=np.float32),
        "fc1.bias": np.full(1, 50.0, dtype=np.float32),
    }
    return Network(config, WeightSet(tensors))


def write_manifest(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")


class TestManifest:
    def test_load_and_relative_paths(self, tmp_path):
        wav = tmp_path / "a.wav"
        write_wav(wav, np.zeros(16240, dtype=np.int16))
        manifest = tmp_path / "m.jsonl"
        write_manifest(manifest, [
            {"path": "a.wav", "label": "positive", "start_ms": 100, "end_ms": 700},
            {"path": str(wav), "label": "negative"},
        ])
        entries = load_manifest(manifest)
        assert len(entries) == 2
        assert entries[0].reference() == (100, 700)
        assert entries[1].reference() is None

    def test_missing_audio_rejected(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        write_manifest(manifest, [{"path": "nope.wav", "label": "positive"}])
        with pytest.raises(KwspotError):
            load_manifest(manifest)

    def test_bad_label_rejected(self, tmp_path):
        wav = tmp_path / "a.wav"
        write_wav(wav, np.zeros(16240, dtype=np.int16))
        manifest = tmp_path / "m.jsonl"
        write_manifest(manifest, [{"path": str(wav), "label": "maybe"}])
        with pytest.raises(KwspotError):
            load_manifest(manifest)


class TestScoreDataset:
    def test_empty_manifest_gives_empty_scores(self):
        scores = score_dataset(always_fire_network(), [])
        assert scores.pos_scores == [] and scores.neg_scores == []

    def test_always_fire_weights_score_one(self, tmp_path):
        wav = tmp_path / "p.wav"
        write_wav(wav, random_pcm(np.random.default_rng(0), 16240))
        scores = score_dataset(
            always_fire_network(), [ManifestEntry(str(wav), "positive")]
        )
        assert scores.pos_scores == [pytest.approx(1.0)]

    def test_scores_match_per_utterance_oracle(self, tmp_path):
        config = make_tiny_crnn(bins=8, steps=3)
        net = build_network(config, seed=3)
        rng = np.random.default_rng(4)
        entries = []
        for i in range(20):
            wav = tmp_path / f"u{i}.wav"
            n = (config.input_frames - 1) * 160 + 400 + int(rng.integers(0, 2000))
            write_wav(wav, random_pcm(rng, n))
            entries.append(ManifestEntry(str(wav), "positive" if i % 2 else "negative"))
        scores = score_dataset(net, entries)
        oracle_pos = [score_utterance(net, e.path) for e in entries if e.label == "positive"]
        oracle_neg = [score_utterance(net, e.path) for e in entries if e.label == "negative"]
        assert scores.pos_scores == oracle_pos
        assert scores.neg_scores == oracle_neg
        assert all(0.0 <= s <= 1.0 for s in scores.pos_scores + scores.neg_scores)

    def test_order_independence(self, tmp_path):
        config = make_tiny_crnn(bins=6, steps=2)
        net = build_network(config, seed=5)
        rng = np.random.default_rng(6)
        entries = []
        for i in range(6):
            wav = tmp_path / f"x{i}.wav"
            write_wav(wav, random_pcm(rng, (config.input_frames - 1) * 160 + 400))
            entries.append(ManifestEntry(str(wav), "positive"))
        forward = score_dataset(net, entries)
        backward = score_dataset(net, list(reversed(entries)))
        assert sorted(forward.pos_scores) == sorted(backward.pos_scores)

    def test_too_many_failures_abort(self, tmp_path):
        wav = tmp_path / "ok.wav"
        write_wav(wav, np.zeros(16240, dtype=np.int16))
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"not audio at all")
        entries = [
            ManifestEntry(str(wav), "positive"),
            ManifestEntry(str(bad), "negative"),
        ]
        with pytest.raises(EvalAbortError):
            score_dataset(always_fire_network(), entries)

    def test_few_failures_are_recorded_not_fatal(self, tmp_path):
        rng = np.random.default_rng(8)
        entries = []
        for i in range(10):
            wav = tmp_path / f"g{i}.wav"
            write_wav(wav, random_pcm(rng, 16240))
            entries.append(ManifestEntry(str(wav), "positive"))
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"nope")
        entries.append(ManifestEntry(str(bad), "negative"))
        scores = score_dataset(always_fire_network(), entries, max_failure_fraction=0.2)
        assert len(scores.failures) == 1
        assert len(scores.pos_scores) == 10
