"""Posterior traces, detection events, and endpoint/latency measurement.

Everything here consumes traces, not audio, so results are independent of
how the upstream audio was chunked.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ClockError, UndefinedMeanError
from .frontend import FRAME_HOP_MS

MS_PER_FRAME = FRAME_HOP_MS


@dataclass(frozen=True)
class StreamPosterior:
    """One posterior for one sliding window of input frames.

    step is the 1-based conv-timestep index at which the window completed;
    first_frame/last_frame are 0-based inclusive input-frame bounds.
    """

    step: int
    first_frame: int
    last_frame: int
    posterior: float
    wall_ms: float | None = None


@dataclass(frozen=True)
class DetectionEvent:
    """A supra-threshold run, located at its peak posterior's window."""

    start_frame: int
    end_frame: int
    peak_posterior: float
    end_audio_ms: float
    detect_wall_ms: float | None = None

    def start_ms(self) -> float:
        return self.start_frame * MS_PER_FRAME

    def end_ms(self) -> float:
        return self.end_frame * MS_PER_FRAME


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 0.5
    hangover_steps: int = 3  # sub-threshold steps that close an event

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0,1), got {self.threshold}")
        if self.hangover_steps < 0:
            raise ValueError("hangover_steps must be >= 0")


class Detector:
    """Incremental thresholding of a posterior trace.

    An event opens when the posterior reaches the threshold, tracks the
    peak step, and closes once hangover_steps consecutive steps fall below
    the threshold (or the trace ends). detect_wall_ms is stamped from the
    closing step, the moment the event is committed.
    """

    def __init__(self, cfg: DetectorConfig):
        self.cfg = cfg
        self._peak: StreamPosterior | None = None
        self._below = 0

    def push(self, sp: StreamPosterior) -> DetectionEvent | None:
        if sp.posterior >= self.cfg.threshold:
            if self._peak is None or sp.posterior > self._peak.posterior:
                self._peak = sp
            self._below = 0
            return None
        if self._peak is not None:
            self._below += 1
            if self._below >= max(self.cfg.hangover_steps, 1):
                return self._close(sp.wall_ms)
        return None

    def flush(self) -> DetectionEvent | None:
        """Close any still-open event at end of trace."""
        if self._peak is None:
            return None
        return self._close(self._peak.wall_ms)

    def _close(self, wall_ms) -> DetectionEvent:
        peak = self._peak
        self._peak = None
        self._below = 0
        return DetectionEvent(
            start_frame=peak.first_frame,
            end_frame=peak.last_frame,
            peak_posterior=peak.posterior,
            end_audio_ms=peak.last_frame * MS_PER_FRAME,
            detect_wall_ms=wall_ms,
        )


def detect(trace, cfg: DetectorConfig) -> list[DetectionEvent]:
    """Threshold a finite trace (in step order) into detection events."""
    detector = Detector(cfg)
    events = []
    for sp in trace:
        event = detector.push(sp)
        if event is not None:
            events.append(event)
    tail = detector.flush()
    if tail is not None:
        events.append(tail)
    return events


@dataclass(frozen=True)
class EndpointReport:
    mean_abs_start_ms: float
    mean_abs_end_ms: float
    matched: int
    missed_refs: int
    unmatched_events: int


def _overlap_ms(event: DetectionEvent, ref: tuple[float, float]) -> float:
    lo = max(event.start_ms(), ref[0])
    hi = min(event.end_ms(), ref[1])
    return hi - lo


def endpoint_delta(events, refs) -> EndpointReport:
    """Mean |start| / |end| deviation in ms between events and references.

    Matching is greedy by maximal overlap, one-to-one; refs that match
    nothing count as misses and are excluded from the means.
    """
    refs = list(refs)
    candidates = [
        (_overlap_ms(e, r), ei, ri)
        for ei, e in enumerate(events)
        for ri, r in enumerate(refs)
    ]
    candidates = sorted(
        (c for c in candidates if c[0] > 0), key=lambda c: (-c[0], c[1], c[2])
    )
    used_events, used_refs = set(), set()
    pairs = []
    for _, ei, ri in candidates:
        if ei in used_events or ri in used_refs:
            continue
        used_events.add(ei)
        used_refs.add(ri)
        pairs.append((events[ei], refs[ri]))
    if not pairs:
        raise UndefinedMeanError("no event overlaps any reference")
    start_deltas = [abs(e.start_ms() - r[0]) for e, r in pairs]
    end_deltas = [abs(e.end_ms() - r[1]) for e, r in pairs]
    return EndpointReport(
        mean_abs_start_ms=sum(start_deltas) / len(pairs),
        mean_abs_end_ms=sum(end_deltas) / len(pairs),
        matched=len(pairs),
        missed_refs=len(refs) - len(used_refs),
        unmatched_events=len(events) - len(used_events),
    )


def latency(event: DetectionEvent, baseline_ms: float = 0.0) -> float:
    """Wall-clock detection time minus the audio time the event ended.

    baseline_ms shifts the result for comparisons against systems whose
    reported latency already includes a fixed offset.
    """
    if event.detect_wall_ms is None:
        raise ClockError("event has no wall-clock timestamp")
    if event.end_audio_ms < 0:
        raise ClockError(f"negative audio time {event.end_audio_ms}")
    return event.detect_wall_ms - event.end_audio_ms + baseline_ms
