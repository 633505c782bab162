"""Behavioral model of the frame-generation datapath.

Models the pieces that matter for output correctness and resource
accounting: a banked dual-port accumulator memory with reset-on-read,
the event-to-address mapping, a bounded FIFO with drop-oldest eviction
for events arriving during readout, and readout latency for X-pixels-
per-clock output. Port-level timing is out of scope; the contract is
that the decoded frame equals what the hardware would emit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .evio import Event, Frame, SensorGeometry
from .representations import (
    FREQ_MAX,
    FREQ_MIN,
    DecodeLut,
    Representation,
    ReprKind,
    build_decode_lut,
    encode_exp_decay_batch,
    update_cell,
)

DEFAULT_FIFO_CAPACITY = 32768


@dataclass(frozen=True)
class TimingConfig:
    """Modeled clock and readout parallelism."""

    clock_hz: int = 100_000_000
    pixels_per_clock: int = 1

    def __post_init__(self):
        if self.clock_hz <= 0:
            raise ConfigError(f"clock_hz must be positive, got {self.clock_hz}")
        if self.pixels_per_clock < 1:
            raise ConfigError(f"pixels_per_clock must be >= 1, got {self.pixels_per_clock}")


def map_event_to_address(event: Event, geometry: SensorGeometry) -> int:
    """Linear cell address: y * width + x."""
    if not (0 <= event.x < geometry.width and 0 <= event.y < geometry.height):
        raise ValueError(f"event ({event.x}, {event.y}) outside {geometry.width}x{geometry.height}")
    return event.y * geometry.width + event.x


def bank_and_offset(address: int, banks: int, geometry: SensorGeometry) -> tuple[int, int]:
    """Which memory block holds an address, and at what cell offset.

    The horizontal pixel index selects the bank (x mod banks) so that a
    readout cycle c fetches addresses c*banks .. c*banks+banks-1, one
    from each bank, giving banks-pixels-per-clock output.
    """
    if geometry.width % banks:
        raise ConfigError(f"width {geometry.width} not divisible by {banks} banks")
    x = address % geometry.width
    return x % banks, address // banks


def readout_latency_us(geometry: SensorGeometry, timing: TimingConfig) -> Fraction:
    """Exact modeled duration of one full-frame readout, in microseconds."""
    x = timing.pixels_per_clock
    if geometry.width % x:
        raise ConfigError(f"width {geometry.width} not divisible by {x} pixels per clock")
    cycles = -(-geometry.n_pixels // x)
    return Fraction(cycles * 1_000_000, timing.clock_hz)


class AccumulatorMode(Enum):
    WRITE = "write"
    READ = "read"


class Accumulator:
    """Banked per-pixel cell store with reset-on-read semantics.

    Cells are held as one row per bank; address a lives at
    ``cells[a % banks_of_x, a // banks]`` (see :func:`bank_and_offset`).
    Event-frequency cells store the signed saturated sum directly; the
    other representations store their unsigned code pattern.
    """

    def __init__(self, geometry: SensorGeometry, repr_: Representation, banks: int = 1):
        if geometry.width % banks:
            raise ConfigError(f"width {geometry.width} not divisible by {banks} banks")
        self.geometry = geometry
        self.repr = repr_
        self.banks = banks
        self.mode = AccumulatorMode.WRITE
        dtype = np.int8 if repr_.kind is ReprKind.EVENT_FREQUENCY else np.uint8
        self._cells = np.zeros((banks, geometry.n_pixels // banks), dtype)
        self._lut: DecodeLut = build_decode_lut(repr_)

    @property
    def lut(self) -> DecodeLut:
        return self._lut

    def raster(self) -> np.ndarray:
        """Stored values in address order (copy)."""
        return self._cells.T.reshape(-1).copy()

    def write(self, event: Event, t_end: int) -> None:
        """Apply one event to its cell. Must be in write mode."""
        if self.mode is AccumulatorMode.READ:
            raise RuntimeError("accumulator written while in read mode; route events to the FIFO")
        address = map_event_to_address(event, self.geometry)
        bank, offset = bank_and_offset(address, self.banks, self.geometry)
        old = int(self._cells[bank, offset])
        self._cells[bank, offset] = update_cell(self.repr, old, event, t_end)

    def write_batch(
        self,
        t: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        p: np.ndarray,
        t_end: int,
        tau_us: int | None = None,
    ) -> None:
        """Vectorized equivalent of per-event :meth:`write` in stream order.

        ``tau_us`` overrides the representation's interval (used by
        count-triggered windows where tau is the window span).
        """
        if self.mode is AccumulatorMode.READ:
            raise RuntimeError("accumulator written while in read mode; route events to the FIFO")
        if t.size == 0:
            return
        width = self.geometry.width
        addr = y.astype(np.int64) * width + x
        kind = self.repr.kind
        if self.banks == 1:
            cells = self._cells[0]
            if kind is ReprKind.BINARY:
                cells[addr] = 1
            elif kind is ReprKind.EVENT_FRAME:
                cells[addr] = np.where(p > 0, 1, 2).astype(np.uint8)
            elif kind is ReprKind.EXP_DECAY:
                cells[addr] = encode_exp_decay_batch(t, t_end, tau_us or self.repr.tau_us, p)
            else:
                self._accumulate_freq(addr, p)
            return
        bank = (x % self.banks).astype(np.int64)
        offset = addr // self.banks
        if kind is ReprKind.BINARY:
            self._cells[bank, offset] = 1
        elif kind is ReprKind.EVENT_FRAME:
            self._cells[bank, offset] = np.where(p > 0, 1, 2).astype(np.uint8)
        elif kind is ReprKind.EXP_DECAY:
            codes = encode_exp_decay_batch(t, t_end, tau_us or self.repr.tau_us, p)
            self._cells[bank, offset] = codes
        else:
            self._accumulate_freq(addr, p, bank, offset)

    def _accumulate_freq(self, addr, p, bank=None, offset=None) -> None:
        # saturating +-1 per event; the plain scatter-add is exact for any
        # pixel where |existing value| + event count stays within [-15, 15],
        # so only pixels that could touch a bound take the sequential path
        pol = np.where(p > 0, 1, -1).astype(np.int8)
        counts = np.bincount(addr, minlength=self.geometry.n_pixels)
        flat_abs = np.abs(self._cells.T.reshape(-1).astype(np.int16))
        hot_pixels = (counts + flat_abs) > FREQ_MAX
        hot_ev = hot_pixels[addr]
        if not hot_ev.any():
            if bank is None:
                np.add.at(self._cells[0], addr, pol)
            else:
                np.add.at(self._cells, (bank, offset), pol)
            return
        cold = ~hot_ev
        if bank is None:
            np.add.at(self._cells[0], addr[cold], pol[cold])
        else:
            np.add.at(self._cells, (bank[cold], offset[cold]), pol[cold])
        width = self.geometry.width
        for i in np.nonzero(hot_ev)[0]:
            a = int(addr[i])
            b = (a % width) % self.banks
            o = a // self.banks
            v = int(self._cells[b, o]) + int(pol[i])
            self._cells[b, o] = min(FREQ_MAX, max(FREQ_MIN, v))

    def readout(self, t_end: int = 0, window_index: int = 0) -> Frame:
        """Decode every cell to gray in raster order, then reset all cells.

        Models the read pass: the frame reflects the pre-read contents
        and afterwards every cell holds the background value.
        """
        raster = self._cells.T.reshape(-1)
        if self.repr.kind is ReprKind.EVENT_FREQUENCY:
            grays = self._lut.table[raster & 0x1F]
        else:
            grays = self._lut.table[raster]
        self._cells.fill(0)
        return Frame(
            width=self.geometry.width,
            height=self.geometry.height,
            pixels=grays,
            t_end=t_end,
            window_index=window_index,
        )


class EventFifo:
    """Bounded queue with drop-oldest eviction when full.

    ``capacity=None`` models an effectively unbounded external-memory
    queue. Evictions that happen in read mode are the architectural
    overflow case and are counted in ``drop_count``; write-mode
    evictions cannot occur in the pipeline (write mode drains the queue
    continuously) and are tallied separately if they ever happen.
    """

    def __init__(self, capacity: int | None = DEFAULT_FIFO_CAPACITY):
        if capacity is not None and capacity < 1:
            raise ConfigError(f"fifo capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._q: deque = deque()
        self.push_count = 0
        self.pop_count = 0
        self.drop_count = 0
        self.write_mode_drop_count = 0
        self.max_occupancy = 0

    def __len__(self) -> int:
        return len(self._q)

    @property
    def occupancy(self) -> int:
        return len(self._q)

    def snapshot(self) -> tuple:
        """Retained elements oldest-first, without consuming them."""
        return tuple(self._q)

    def push(self, event, in_read_mode: bool = False) -> None:
        """Append an event, evicting the oldest first if full."""
        if self.capacity is not None and len(self._q) >= self.capacity:
            self._q.popleft()
            if in_read_mode:
                self.drop_count += 1
            else:
                self.write_mode_drop_count += 1
        self._q.append(event)
        self.push_count += 1
        if len(self._q) > self.max_occupancy:
            self.max_occupancy = len(self._q)

    def pop(self):
        """Remove and return the oldest retained event, or None if empty."""
        if not self._q:
            return None
        self.pop_count += 1
        return self._q.popleft()
