"""Drive the accumulator over an event stream and emit frames.

Three window triggers are supported: fixed time interval, fixed event
count, and a rolling window (accumulate N, emit every K covering the
last M). Readout can be behavioral (instantaneous, lossless) or
hardware-timed, where each readout occupies the modeled latency and
events arriving meanwhile wait in the bounded FIFO, evicting oldest on
overflow. Ping-pong buffering swaps two accumulators instead, so
nothing is ever queued or dropped at the cost of double storage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .errors import ConfigError, StreamOrderError
from .evio import EventColumns, Frame, SensorGeometry, events_to_array
from .evio import _columns_from_struct
from .hwmodel import (
    DEFAULT_FIFO_CAPACITY,
    Accumulator,
    TimingConfig,
    readout_latency_us,
)
from .representations import (
    Representation,
    ReprKind,
    build_decode_lut,
    encode_exp_decay_batch,
    freq_value_to_code,
)


@dataclass(frozen=True)
class TimeWindow:
    """Emit one frame per fixed accumulation interval."""

    tau_us: int

    def __post_init__(self):
        if self.tau_us <= 0:
            raise ConfigError(f"tau_us must be positive, got {self.tau_us}")


@dataclass(frozen=True)
class CountWindow:
    """Emit one frame after every fixed number of processed events."""

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"count window needs count >= 1, got {self.count}")


@dataclass(frozen=True)
class RollingWindow:
    """Accumulate n_us of events, emit every k_us covering the last m_us."""

    n_us: int = 8_000
    m_us: int = 4_000
    k_us: int = 1_000

    def __post_init__(self):
        if self.k_us <= 0 or not (self.k_us <= self.m_us <= self.n_us):
            raise ConfigError(
                f"rolling window needs 0 < K <= M <= N, got ({self.n_us}, {self.m_us}, {self.k_us})"
            )
        if self.m_us % self.k_us or self.n_us % self.k_us:
            raise ConfigError(
                f"rolling window needs K dividing M and N, got ({self.n_us}, {self.m_us}, {self.k_us})"
            )

    @property
    def subwindows(self) -> int:
        return self.n_us // self.k_us

    @property
    def index_bits(self) -> int:
        """Extra stored bits identifying the sub-window of each cell."""
        s = self.subwindows
        return max(1, math.ceil(math.log2(s))) if s > 1 else 0


@dataclass(frozen=True)
class FifoBuffering:
    capacity: int = DEFAULT_FIFO_CAPACITY

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError(f"fifo capacity must be >= 1, got {self.capacity}")


@dataclass(frozen=True)
class PingPongBuffering:
    """Two alternating accumulators; writes continue during readout."""


@dataclass(frozen=True)
class UnboundedBuffering:
    """External-memory queue stand-in: never drops, occupancy unbounded."""


@dataclass(frozen=True)
class Behavioral:
    """Readout is instantaneous and lossless."""


@dataclass(frozen=True)
class HardwareTimed:
    """Readout occupies the modeled latency of the timing configuration."""

    timing: TimingConfig = TimingConfig()


Trigger = TimeWindow | CountWindow | RollingWindow
Buffering = FifoBuffering | PingPongBuffering | UnboundedBuffering
TimingMode = Behavioral | HardwareTimed


@dataclass(frozen=True)
class PipelineConfig:
    repr: Representation
    geometry: SensorGeometry = SensorGeometry()
    banks: int = 1
    trigger: Trigger = TimeWindow(10_000)
    buffering: Buffering = FifoBuffering()
    timing_mode: TimingMode = Behavioral()

    def validate(self) -> None:
        if self.banks < 1:
            raise ConfigError(f"banks must be >= 1, got {self.banks}")
        if self.geometry.width % self.banks:
            raise ConfigError(
                f"width {self.geometry.width} not divisible by {self.banks} banks"
            )
        if isinstance(self.trigger, RollingWindow):
            if (
                self.repr.kind is ReprKind.EXP_DECAY
                and self.trigger.m_us > self.repr.tau_us
            ):
                raise ConfigError(
                    f"rolling window M={self.trigger.m_us} exceeds tau={self.repr.tau_us}; "
                    "decayed codes would be out of range"
                )
        if isinstance(self.timing_mode, HardwareTimed):
            timing = self.timing_mode.timing
            if timing.pixels_per_clock != self.banks:
                raise ConfigError(
                    f"timing pixels_per_clock ({timing.pixels_per_clock}) must equal banks ({self.banks})"
                )
            latency = readout_latency_us(self.geometry, timing)
            period = None
            if isinstance(self.trigger, TimeWindow):
                period = self.trigger.tau_us
            elif isinstance(self.trigger, RollingWindow):
                period = self.trigger.k_us
            if period is not None and latency > period:
                raise ConfigError(
                    f"readout latency {float(latency):.1f} us exceeds the {period} us window period; "
                    "raise banks or the window period"
                )


@dataclass
class PipelineStats:
    """Counters for one pipeline run; stable once the run completes."""

    frames_emitted: int = 0
    events_processed: int = 0
    events_dropped: int = 0
    fifo_max_occupancy: int = 0
    modeled_readout_busy_us: float = 0.0

    def as_kv_lines(self) -> list[str]:
        return [
            f"frames_emitted={self.frames_emitted}",
            f"events_processed={self.events_processed}",
            f"events_dropped={self.events_dropped}",
            f"fifo_max_occupancy={self.fifo_max_occupancy}",
            f"modeled_readout_busy_us={self.modeled_readout_busy_us}",
        ]


def _ceil_to_int(value) -> int:
    return math.ceil(value)


class Pipeline:
    """Single-owner streaming engine for one configuration.

    ``iter_frames`` processes an event stream in timestamp order and
    yields frames as window boundaries are crossed; counters accumulate
    in :attr:`stats`. ``dropped_ranges`` records the index ranges of
    events evicted from the FIFO, so a run can be replayed without them.
    """

    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self.stats = PipelineStats()
        self.dropped_ranges: list[tuple[int, int]] = []
        self._hardware = isinstance(config.timing_mode, HardwareTimed)
        self._pingpong = isinstance(config.buffering, PingPongBuffering)
        self._capacity: int | None
        if isinstance(config.buffering, FifoBuffering):
            self._capacity = config.buffering.capacity
        else:
            self._capacity = None  # ping-pong or unbounded: no eviction
        self._latency = (
            readout_latency_us(config.geometry, config.timing_mode.timing)
            if self._hardware
            else Fraction(0)
        )

    # -- public API ---------------------------------------------------

    def run(self, events, flush: bool = False) -> list[Frame]:
        return list(self.iter_frames(events, flush=flush))

    def iter_frames(self, events, flush: bool = False) -> Iterator[Frame]:
        cols = self._normalize(events)
        trigger = self.config.trigger
        if isinstance(trigger, TimeWindow):
            yield from self._run_time(cols, flush)
        elif isinstance(trigger, CountWindow):
            yield from self._run_count(cols, flush)
        else:
            yield from self._run_rolling(cols, flush)

    def dropped_indices(self) -> np.ndarray:
        """Global indices of events that were evicted from the FIFO."""
        if not self.dropped_ranges:
            return np.empty(0, np.int64)
        return np.concatenate([np.arange(a, b) for a, b in self.dropped_ranges])

    # -- shared machinery ----------------------------------------------

    def _normalize(self, events) -> EventColumns:
        if isinstance(events, EventColumns):
            return events  # carries the validated-contract by construction
        cols = _columns_from_struct(events_to_array(events))
        t = cols.t
        if t.size:
            if int(t[0]) < 0:
                raise StreamOrderError(0, int(t[0]))
            if not np.all(t[1:] >= t[:-1]):
                i = int(np.nonzero(t[1:] < t[:-1])[0][0])
                raise StreamOrderError(int(t[i]), int(t[i + 1]))
            geom = self.config.geometry
            if (int(cols.x.max()) >= geom.width or int(cols.y.max()) >= geom.height
                    or int(cols.x.min()) < 0 or int(cols.y.min()) < 0):
                raise ConfigError(
                    f"events exceed the configured geometry {geom.width}x{geom.height}"
                )
        return cols

    def _queue_interval(self, t: np.ndarray, lo: int, hi_cap: int, readout_start) -> int:
        """Apply drop-oldest to events queued during one readout interval.

        Events at indices [lo, j) with timestamps before readout end are
        held in the FIFO; beyond capacity the oldest are evicted. Returns
        the first retained index.
        """
        if not self._hardware or self._pingpong:
            return lo
        threshold = _ceil_to_int(readout_start + self._latency)
        j = min(int(np.searchsorted(t, threshold)), hi_cap)
        queued = j - lo
        if queued <= 0:
            return lo
        if self._capacity is None:  # unbounded queue
            self._note_occupancy(queued)
            return lo
        self._note_occupancy(min(queued, self._capacity))
        if queued <= self._capacity:
            return lo
        dropped = queued - self._capacity
        self.dropped_ranges.append((lo, lo + dropped))
        self.stats.events_dropped += dropped
        return lo + dropped

    def _note_occupancy(self, occupancy: int) -> None:
        if occupancy > self.stats.fifo_max_occupancy:
            self.stats.fifo_max_occupancy = occupancy

    def _finish(self, n_events: int) -> None:
        self.stats.events_processed = n_events - self.stats.events_dropped
        if n_events and not self._pingpong and self.stats.fifo_max_occupancy == 0:
            # every event transits the queue even in pure write mode
            self.stats.fifo_max_occupancy = 1

    def _account_readout(self) -> None:
        self.stats.frames_emitted += 1
        if self._hardware:
            self.stats.modeled_readout_busy_us += float(self._latency)

    # -- time-triggered -------------------------------------------------

    def _run_time(self, cols: EventColumns, flush: bool) -> Iterator[Frame]:
        n = len(cols)
        if n == 0:
            return
        tau = self.config.trigger.tau_us
        t = cols.t
        acc = Accumulator(self.config.geometry, self.config.repr, self.config.banks)
        n_full = int(t[-1]) // tau
        lo = 0
        for w in range(n_full):
            hi = int(np.searchsorted(t, (w + 1) * tau))
            if w > 0:
                lo = self._queue_interval(t, lo, hi, w * tau)
            acc.write_batch(t[lo:hi], cols.x[lo:hi], cols.y[lo:hi], cols.p[lo:hi],
                            t_end=(w + 1) * tau)
            frame = acc.readout(t_end=(w + 1) * tau, window_index=w)
            self._account_readout()
            yield frame
            lo = hi
        if n_full > 0:
            lo = self._queue_interval(t, lo, n, n_full * tau)
        if flush and lo < n:
            acc.write_batch(t[lo:], cols.x[lo:], cols.y[lo:], cols.p[lo:],
                            t_end=(n_full + 1) * tau)
            frame = acc.readout(t_end=(n_full + 1) * tau, window_index=n_full)
            self._account_readout()
            yield frame
        self._finish(n)

    # -- count-triggered ------------------------------------------------

    def _run_count(self, arr: np.ndarray, flush: bool) -> Iterator[Frame]:
        n = len(arr)
        if n == 0:
            return
        z = self.config.trigger.count
        t = arr["t"]
        exp_repr = self.config.repr.kind is ReprKind.EXP_DECAY
        acc = Accumulator(self.config.geometry, self.config.repr, self.config.banks)
        i = 0
        frame_idx = 0
        readout_start = None  # start time of the most recent readout
        busy_until = Fraction(0)
        while True:
            if readout_start is not None:
                i = self._queue_interval(t, i, n, readout_start)
            if n - i < z:
                break
            hi = i + z
            t_end = int(t[hi - 1])
            tau_eff = max(1, t_end - int(t[i])) if exp_repr else None
            acc.write_batch(t[i:hi], arr["x"][i:hi], arr["y"][i:hi], arr["p"][i:hi],
                            t_end=t_end, tau_us=tau_eff)
            frame = acc.readout(t_end=t_end, window_index=frame_idx)
            self._account_readout()
            yield frame
            frame_idx += 1
            if self._hardware:
                start = max(Fraction(t_end), busy_until)
                readout_start = start
                busy_until = start + self._latency
            i = hi
        if flush and i < n:
            t_end = int(t[-1])
            tau_eff = max(1, t_end - int(t[i])) if exp_repr else None
            acc.write_batch(t[i:], arr["x"][i:], arr["y"][i:], arr["p"][i:],
                            t_end=t_end, tau_us=tau_eff)
            frame = acc.readout(t_end=t_end, window_index=frame_idx)
            self._account_readout()
            yield frame
        self._finish(n)

    # -- rolling window ---------------------------------------------------

    def _run_rolling(self, arr: np.ndarray, flush: bool) -> Iterator[Frame]:
        n = len(arr)
        if n == 0:
            return
        trig = self.config.trigger
        k_us = trig.k_us
        span = trig.subwindows
        visible_span = trig.m_us // k_us
        geom = self.config.geometry
        repr_ = self.config.repr
        kind = repr_.kind
        t = arr["t"]

        # per-pixel latest event; the stored sub-window index is kept as an
        # absolute ordinal (the hardware stores it modulo S plus reset)
        no_event = np.int64(-(span + visible_span + 2))
        last_w = np.full(geom.n_pixels, no_event, np.int64)
        last_t = np.zeros(geom.n_pixels, np.int64)
        last_p = np.zeros(geom.n_pixels, np.int8)

        lut = build_decode_lut(repr_).table
        background = 0 if kind is ReprKind.BINARY else 128
        if kind is ReprKind.EVENT_FREQUENCY:
            gray_pos = lut[freq_value_to_code(1)]
            gray_neg = lut[freq_value_to_code(-1)]

        n_full = int(t[-1]) // k_us
        emissions = list(range(n_full)) + ([n_full] if flush else [])
        lo = 0
        for w in emissions:
            hi = n if w == n_full else int(np.searchsorted(t, (w + 1) * k_us))
            if w > 0:
                lo = self._queue_interval(t, lo, hi, w * k_us)
            if hi > lo:
                addr = arr["y"][lo:hi].astype(np.int64) * geom.width + arr["x"][lo:hi]
                last_t[addr] = t[lo:hi]
                last_p[addr] = arr["p"][lo:hi]
                last_w[addr] = w
            t_end = (w + 1) * k_us
            pixels = np.full(geom.n_pixels, background, np.uint8)
            vis = np.nonzero(last_w > w - visible_span)[0]
            if vis.size:
                if kind is ReprKind.BINARY:
                    pixels[vis] = lut[1]
                elif kind is ReprKind.EVENT_FRAME:
                    pixels[vis] = np.where(last_p[vis] > 0, lut[1], lut[2])
                elif kind is ReprKind.EVENT_FREQUENCY:
                    pixels[vis] = np.where(last_p[vis] > 0, gray_pos, gray_neg)
                else:
                    codes = encode_exp_decay_batch(
                        last_t[vis], t_end, repr_.tau_us, last_p[vis]
                    )
                    pixels[vis] = lut[codes]
            frame = Frame(width=geom.width, height=geom.height, pixels=pixels,
                          t_end=t_end, window_index=w)
            self._account_readout()
            yield frame
            # reclaim the slot about to be reused by sub-window w+1
            stale = last_w == (w + 1 - span)
            if stale.any():
                last_w[stale] = no_event
            lo = hi
        self._finish(n)


def run_time_windowed(events, config: PipelineConfig, flush: bool = False):
    """Run a time-triggered pipeline; returns (frames, stats)."""
    if not isinstance(config.trigger, TimeWindow):
        raise ConfigError("run_time_windowed requires a TimeWindow trigger")
    pipe = Pipeline(config)
    frames = pipe.run(events, flush=flush)
    return frames, pipe.stats


def run_count_windowed(events, config: PipelineConfig, flush: bool = False):
    """Run a count-triggered pipeline; returns (frames, stats)."""
    if not isinstance(config.trigger, CountWindow):
        raise ConfigError("run_count_windowed requires a CountWindow trigger")
    pipe = Pipeline(config)
    frames = pipe.run(events, flush=flush)
    return frames, pipe.stats


def run_rolling_window(events, config: PipelineConfig, flush: bool = False):
    """Run a rolling-window pipeline; returns (frames, stats)."""
    if not isinstance(config.trigger, RollingWindow):
        raise ConfigError("run_rolling_window requires a RollingWindow trigger")
    pipe = Pipeline(config)
    frames = pipe.run(events, flush=flush)
    return frames, pipe.stats


def pipeline_stats(pipeline: Pipeline) -> PipelineStats:
    """Counters of a pipeline instance (stable between runs)."""
    return pipeline.stats
