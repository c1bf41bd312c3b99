"""Streaming inference on unbounded audio.

The conv front end runs behind per-layer ring buffers so overlapping
windows are never recomputed; the recurrent tail runs under one of two
strategies that both reproduce offline sliding-window inference:

  * bank  - h staggered GRU decoders; decoder i starts at timestep i+1,
    emits after its h-th step, then resets and continues with the next
    step. From step h onward exactly one posterior is emitted per step.
  * hyper - one batched GRU with an (h, d) hidden state; buffers 2h-1
    timesteps, converts them into h overlapping h-step inputs, and emits
    h posteriors per completed block.

Every stage computes each emission from a fixed-shape window, so the
output bits never depend on how the input stream was chunked. One engine
instance owns one stream; distinct engines may share a WeightSet. The
decoders in a bank are independent between emissions and could be
advanced concurrently; this implementation steps them in order, which
also keeps emissions in step order.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .detect import Detector, DetectorConfig, DetectionEvent, StreamPosterior
from .errors import ConfigError
from .frontend import HOP_SAMPLES, WINDOW_SAMPLES, lfbe_frame
from .models import ModelConfig, receptive_field
from .network import (
    BatchNormLayer,
    ConvLayer,
    DeltaLayer,
    FlattenLayer,
    Network,
)

F32 = np.float32


class TimeRingBuffer:
    """Fixed-extent buffer emitting one output per stride once full.

    Holds at most extent + stride - 1 rows between pushes; compute_fn maps
    an (extent, ...) window to one output row.
    """

    def __init__(self, extent: int, stride: int, compute_fn):
        self.extent = extent
        self.stride = stride
        self.compute_fn = compute_fn
        self._rows: list[np.ndarray] = []
        self._skip = 0

    def push(self, rows) -> list[np.ndarray]:
        out = []
        for row in rows:
            if self._skip > 0:
                self._skip -= 1
                continue
            self._rows.append(row)
            if len(self._rows) == self.extent:
                out.append(self.compute_fn(np.stack(self._rows)))
                drop = min(self.stride, len(self._rows))
                del self._rows[:drop]
                self._skip = self.stride - drop
        return out

    def state_elements(self) -> int:
        return sum(int(row.size) for row in self._rows)


class StreamingConvFrontEnd:
    """Ring-buffered front end: LFBE frames in, flattened conv timesteps out."""

    def __init__(self, network: Network):
        if not network.is_recurrent:
            raise ConfigError("streaming needs a conv front end feeding a recurrent tail")
        self.stages = []
        front = network.layers[: network._split]
        i = 0
        while i < len(front):
            layer = front[i]
            if isinstance(layer, DeltaLayer):
                self.stages.append(TimeRingBuffer(2, 1, lambda w: w[1] - w[0]))
                i += 1
            elif isinstance(layer, ConvLayer):
                post = []
                j = i + 1
                while j < len(front) and isinstance(front[j], BatchNormLayer):
                    post.append(front[j])
                    j += 1
                self.stages.append(
                    TimeRingBuffer(
                        layer.spec.kernel[0],
                        layer.spec.stride[0],
                        self._conv_step_fn(layer, post),
                    )
                )
                i = j
            elif isinstance(layer, FlattenLayer):
                i += 1  # handled by the final reshape
            else:
                raise ConfigError(f"front end cannot stream layer {type(layer).__name__}")

    @staticmethod
    def _conv_step_fn(conv: ConvLayer, post):
        _, sf = conv.spec.stride

        def compute(window):
            x = window if window.ndim == 3 else window[:, :, None]
            out = kernels.conv2d(x, conv.kernel, (1, sf), conv.bias)
            for layer in post:
                out = layer(out)
            return out[0]

        return compute

    def push_frames(self, frames) -> list[np.ndarray]:
        """New LFBE frames (each (f,) float32) to new flattened timesteps."""
        rows = [np.asarray(f, dtype=F32) for f in frames]
        for stage in self.stages:
            rows = stage.push(rows)
            if not rows:
                return []
        return [row.reshape(-1) for row in rows]

    def state_elements(self) -> int:
        return sum(stage.state_elements() for stage in self.stages)


def _window_frames(step: int, h: int, k: int, rf: int) -> tuple[int, int]:
    """0-based input-frame bounds of the window emitted at 1-based step."""
    return (step - h) * k, (step - 1) * k + rf - 1


class DecoderBank:
    """h GRU decoders with staggered resets; one emission per step after warm-up.

    Decoder i consumes its first timestep at step i+1. After a decoder has
    consumed h steps its hidden states run through attention and the head,
    it resets, and it rejoins at the next step, so resets never require
    replaying old timesteps.
    """

    def __init__(self, network: Network):
        self.network = network
        self.gru = network.gru_params()
        self.rf, self.k, self.h = receptive_field(network.config)
        d = self.gru.hidden_dim
        self._states = [np.zeros(d, dtype=F32) for _ in range(self.h)]
        self._histories: list[list[np.ndarray]] = [[] for _ in range(self.h)]
        self._step = 0

    def push(self, timestep) -> StreamPosterior | None:
        self._step += 1
        x = np.asarray(timestep, dtype=F32)
        emitted = None
        for i in range(self.h):
            if self._step < i + 1:
                continue
            self._states[i] = kernels.gru_cell(self.gru, x, self._states[i])
            self._histories[i].append(self._states[i])
            if len(self._histories[i]) == self.h:
                posterior = self.network.tail_from_states(np.stack(self._histories[i]))
                first, last = _window_frames(self._step, self.h, self.k, self.rf)
                emitted = StreamPosterior(self._step, first, last, posterior)
                self._states[i] = np.zeros_like(self._states[i])
                self._histories[i] = []
        return emitted

    def state_elements(self) -> int:
        d = self.gru.hidden_dim
        return sum(len(hist) * d for hist in self._histories) + self.h * d


class HyperGruDecoder:
    """Batched-GRU strategy: h posteriors per 2h-1 buffered timesteps.

    The block's 2h-1 timesteps become h overlapping h-step sequences; one
    GRU with an (h, d) hidden state advances them in lockstep, sharing a
    single set of parameter matrices. Consecutive blocks overlap by h-1
    timesteps so window coverage is gapless.
    """

    def __init__(self, network: Network):
        self.network = network
        self.gru = network.gru_params()
        self.rf, self.k, self.h = receptive_field(network.config)
        self._block: list[np.ndarray] = []
        self._base_step = 0

    def push(self, timestep) -> list[StreamPosterior]:
        self._block.append(np.asarray(timestep, dtype=F32))
        h = self.h
        if len(self._block) < 2 * h - 1:
            return []
        states = np.zeros((h, self.gru.hidden_dim), dtype=F32)
        per_tau = []
        for tau in range(h):
            batch = np.stack(self._block[tau : tau + h])
            states = kernels.gru_cell(self.gru, batch, states)
            per_tau.append(states)
        all_states = np.stack(per_tau, axis=1)  # (row, tau, d)
        out = []
        for i in range(h):
            posterior = self.network.tail_from_states(all_states[i])
            step = self._base_step + i + h
            first, last = _window_frames(step, h, self.k, self.rf)
            out.append(StreamPosterior(step, first, last, posterior))
        del self._block[:h]
        self._base_step += h
        return out

    def state_elements(self) -> int:
        return sum(int(b.size) for b in self._block)


STRATEGIES = ("bank", "hyper")


def make_decoder(network: Network, strategy: str):
    if strategy == "bank":
        return DecoderBank(network)
    if strategy == "hyper":
        return HyperGruDecoder(network)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")


class StreamEngine:
    """frontend -> ring-buffer conv -> decoder strategy -> detector.

    Feed PCM with push_samples (any chunking; the posterior trace is
    bitwise chunking-independent) or precomputed LFBE frames with
    push_frames. Memory is bounded: every buffer has a fixed capacity
    regardless of stream length.
    """

    def __init__(
        self,
        network: Network,
        strategy: str = "bank",
        detector: DetectorConfig | None = None,
        clock=time.monotonic,
    ):
        self.network = network
        self.frontend = StreamingConvFrontEnd(network)
        self.decoder = make_decoder(network, strategy)
        self.detector = Detector(detector or DetectorConfig())
        self._residual = np.zeros(0, dtype=np.int16)
        self._clock = clock
        self._start = clock()
        self._frames_in = 0

    def _wall_ms(self) -> float:
        return (self._clock() - self._start) * 1000.0

    def push_samples(self, samples) -> tuple[list[StreamPosterior], list[DetectionEvent]]:
        """Consume raw 16 kHz PCM; returns newly emitted posteriors and events."""
        pcm = np.concatenate([self._residual, np.asarray(samples, dtype=np.int16)])
        frames = []
        start = 0
        while start + WINDOW_SAMPLES <= len(pcm):
            frames.append(
                lfbe_frame(pcm[start : start + WINDOW_SAMPLES], self.network.config.input_bins)
            )
            start += HOP_SAMPLES
        self._residual = pcm[start:]
        return self.push_frames(frames)

    def push_frames(self, frames) -> tuple[list[StreamPosterior], list[DetectionEvent]]:
        self._frames_in += len(frames)
        wall = self._wall_ms()
        posteriors = []
        events = []
        for step_vec in self.frontend.push_frames(frames):
            emitted = self.decoder.push(step_vec)
            if emitted is None:
                emitted = []
            elif isinstance(emitted, StreamPosterior):
                emitted = [emitted]
            for sp in emitted:
                sp = StreamPosterior(sp.step, sp.first_frame, sp.last_frame, sp.posterior, wall)
                posteriors.append(sp)
                event = self.detector.push(sp)
                if event is not None:
                    events.append(event)
        return posteriors, events

    def finish(self) -> list[DetectionEvent]:
        """Flush the detector at end of stream."""
        event = self.detector.flush()
        return [event] if event is not None else []

    def state_elements(self) -> int:
        """Total buffered floats; constant after warm-up however long the stream."""
        return (
            self.frontend.state_elements()
            + self.decoder.state_elements()
            + len(self._residual)
        )
