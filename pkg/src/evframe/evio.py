"""Event stream I/O, frame containers, and synthetic test sequences.

Events travel as CSV text, one ``t,x,y,p`` record per line with integer
microsecond timestamps. Polarity accepts both common conventions at the
boundary ({1, -1} and {1, 0}) and is normalized to {+1, -1} internally.
Frames are written as binary PGM (P5), the simplest bit-exact 8-bit
grayscale container.

Two parsing paths exist: a line-by-line reference parser with precise
per-line diagnostics, and a columnar fast path (:func:`load_events`)
used by the CLI for throughput.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import BinaryIO, Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, DataError, EventParseError, StreamOrderError

logger = logging.getLogger(__name__)

US_PER_MS = 1_000

#: columnar layout for event batches
EVENT_DTYPE = np.dtype([("t", "<i8"), ("x", "<i4"), ("y", "<i4"), ("p", "<i1")])


@dataclass(frozen=True, slots=True)
class SensorGeometry:
    """Pixel dimensions of the sensor; defaults to the HD test geometry."""

    width: int = 1280
    height: int = 720

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"geometry must be at least 1x1, got {self.width}x{self.height}")

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


@dataclass(frozen=True, slots=True)
class Event:
    """One camera event: timestamp (us), column, row, polarity in {+1, -1}."""

    t: int
    x: int
    y: int
    p: int


@dataclass(eq=False)
class Frame:
    """An 8-bit grayscale frame plus emission metadata.

    ``pixels`` is a flat row-major uint8 array of length width*height.
    ``t_end`` is the nominal end of the accumulation window in
    microseconds and ``window_index`` the ordinal of the emitted frame.
    """

    width: int
    height: int
    pixels: np.ndarray
    t_end: int
    window_index: int

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.width * self.height,):
            raise ValueError(
                f"pixel count {self.pixels.size} does not match {self.width}x{self.height}"
            )

    def as_image(self) -> np.ndarray:
        """(height, width) view of the pixel data."""
        return self.pixels.reshape(self.height, self.width)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.t_end == other.t_end
            and self.window_index == other.window_index
            and np.array_equal(self.pixels, other.pixels)
        )


_FIELD_NAMES = ("t", "x", "y", "p")


def parse_event_line(line: str, geometry: SensorGeometry, line_no: int = 1) -> Event:
    """Parse one ``t,x,y,p`` record, normalizing polarity to {+1, -1}.

    Raises :class:`EventParseError` naming the line and field for any
    malformed token or out-of-range coordinate.
    """
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise EventParseError(line_no, "record", f"expected 4 fields, got {len(parts)}")
    values = []
    for name, token in zip(_FIELD_NAMES, parts):
        try:
            values.append(int(token))
        except ValueError:
            raise EventParseError(line_no, name, f"not an integer: {token!r}") from None
    t, x, y, p = values
    if t < 0:
        raise EventParseError(line_no, "t", f"negative timestamp {t}")
    if not 0 <= x < geometry.width:
        raise EventParseError(line_no, "x", f"x out of range: {x} not in [0, {geometry.width})")
    if not 0 <= y < geometry.height:
        raise EventParseError(line_no, "y", f"y out of range: {y} not in [0, {geometry.height})")
    if p not in (-1, 0, 1):
        raise EventParseError(line_no, "p", f"polarity must be -1, 0 or 1, got {p}")
    return Event(t=t, x=x, y=y, p=1 if p == 1 else -1)


def format_event_line(event: Event) -> str:
    """Inverse of :func:`parse_event_line` (polarity written as 1/-1)."""
    return f"{event.t},{event.x},{event.y},{event.p}"


def read_event_stream(
    source, geometry: SensorGeometry, order_policy: str = "strict"
) -> list[Event]:
    """Read and validate a whole event stream from a file-like or lines.

    ``order_policy`` controls timestamp-order handling: ``strict`` raises
    on any decrease, ``sort`` stably sorts by timestamp, ``warn`` passes
    events through and logs how many were out of order.
    """
    if order_policy not in ("strict", "sort", "warn"):
        raise ConfigError(f"unknown order policy: {order_policy!r}")
    events: list[Event] = []
    prev_t = None
    out_of_order = 0
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("ascii")
        if not raw.strip():
            continue
        ev = parse_event_line(raw, geometry, line_no)
        if prev_t is not None and ev.t < prev_t:
            if order_policy == "strict":
                raise StreamOrderError(prev_t, ev.t, line_no)
            out_of_order += 1
        prev_t = ev.t
        events.append(ev)
    if order_policy == "sort":
        events.sort(key=lambda e: e.t)
    elif out_of_order:
        logger.warning("%d out-of-order events passed through", out_of_order)
    return events


def events_to_array(events) -> np.ndarray:
    """Normalize a sequence of :class:`Event` (or an array) to EVENT_DTYPE."""
    if isinstance(events, EventColumns):
        return _struct_from_columns(events)
    if isinstance(events, np.ndarray):
        if events.dtype == EVENT_DTYPE:
            return events
        return events.astype(EVENT_DTYPE)
    arr = np.empty(len(events), EVENT_DTYPE)
    for i, ev in enumerate(events):
        arr[i] = (ev.t, ev.x, ev.y, ev.p)
    return arr


def array_to_events(arr: np.ndarray) -> list[Event]:
    return [Event(int(t), int(x), int(y), int(p)) for t, x, y, p in arr]


def _validate_event_columns(
    t: np.ndarray, x: np.ndarray, y: np.ndarray, p: np.ndarray, geometry: SensorGeometry
) -> None:
    if t.size == 0:
        return
    for name, col, lo, hi in (
        ("t", t, 0, None),
        ("x", x, 0, geometry.width),
        ("y", y, 0, geometry.height),
    ):
        cmin = int(col.min())
        if cmin < lo:
            row = int(np.argmax(col < lo)) + 1
            raise EventParseError(row, name, f"value {cmin} below {lo}")
        if hi is not None:
            cmax = int(col.max())
            if cmax >= hi:
                row = int(np.argmax(col >= hi)) + 1
                raise EventParseError(row, name, f"{name} out of range: {cmax} not in [0, {hi})")
    bad_p = (p != 1) & (p != 0) & (p != -1)
    if bad_p.any():
        row = int(np.argmax(bad_p)) + 1
        raise EventParseError(row, "p", f"polarity must be -1, 0 or 1, got {int(p[row - 1])}")


def load_events(path, geometry: SensorGeometry, order_policy: str = "strict") -> np.ndarray:
    """Read a whole CSV event file into an EVENT_DTYPE array.

    Same contract as :func:`read_event_stream`; backed by the columnar
    fast path (:func:`read_event_columns`).
    """
    return _struct_from_columns(read_event_columns(path, geometry, order_policy))


def save_events(path, events) -> None:
    """Write events as ``t,x,y,p`` CSV (polarity as 1/-1)."""
    import polars as pl

    if isinstance(events, EventColumns):
        cols = events
    else:
        cols = _columns_from_struct(events_to_array(events))
    pl.DataFrame(
        {"t": cols.t, "x": cols.x, "y": cols.y, "p": cols.p.astype(np.int32)}
    ).write_csv(path, include_header=False)


class EventColumns(NamedTuple):
    """Validated, contiguous event columns (the pipeline's fast path).

    Produced by :func:`read_event_columns`; timestamps are
    non-decreasing, coordinates in range, polarity normalized to +-1.
    Constructing one by hand asserts the same contract.
    """

    t: np.ndarray  # int64 microseconds
    x: np.ndarray  # int32
    y: np.ndarray  # int32
    p: np.ndarray  # int8, +-1

    def __len__(self) -> int:
        return len(self.t)

    def take(self, indices) -> "EventColumns":
        return EventColumns(self.t[indices], self.x[indices],
                            self.y[indices], self.p[indices])


def _columns_from_struct(arr: np.ndarray) -> EventColumns:
    return EventColumns(
        np.ascontiguousarray(arr["t"], np.int64),
        np.ascontiguousarray(arr["x"], np.int32),
        np.ascontiguousarray(arr["y"], np.int32),
        np.ascontiguousarray(arr["p"], np.int8),
    )


def _struct_from_columns(cols: EventColumns) -> np.ndarray:
    arr = np.empty(len(cols), EVENT_DTYPE)
    arr["t"] = cols.t
    arr["x"] = cols.x
    arr["y"] = cols.y
    arr["p"] = cols.p
    return arr


def read_event_columns(path, geometry: SensorGeometry, order_policy: str = "strict") -> EventColumns:
    """Columnar CSV fast path; same contract as :func:`read_event_stream`.

    Parse diagnostics are coarser than the line reader, but validation
    failures still report the first bad row.
    """
    if order_policy not in ("strict", "sort", "warn"):
        raise ConfigError(f"unknown order policy: {order_policy!r}")
    import polars as pl

    try:
        df = pl.read_csv(
            path,
            has_header=False,
            schema={"t": pl.Int64, "x": pl.Int32, "y": pl.Int32, "p": pl.Int8},
        )
    except Exception as exc:  # malformed text or wrong column count
        raise DataError(f"cannot parse event file {path}: {exc}") from exc
    t = df["t"].to_numpy()
    x = df["x"].to_numpy()
    y = df["y"].to_numpy()
    p = df["p"].to_numpy()
    _validate_event_columns(t, x, y, p, geometry)
    if not p.flags.writeable:
        p = p.copy()
    p[p == 0] = -1  # accept the {1, 0} polarity convention
    cols = EventColumns(t, x, y, p)
    return _order_columns(cols, order_policy)


def _order_columns(cols: EventColumns, order_policy: str) -> EventColumns:
    t = cols.t
    if t.size < 2 or bool(np.all(t[1:] >= t[:-1])):
        return cols
    if order_policy == "strict":
        bad = np.nonzero(t[1:] < t[:-1])[0]
        i = int(bad[0])
        raise StreamOrderError(int(t[i]), int(t[i + 1]), line_no=i + 2)
    if order_policy == "sort":
        return cols.take(np.argsort(t, kind="stable"))
    logger.warning("%d out-of-order events passed through", int(np.sum(t[1:] < t[:-1])))
    return cols


class PgmImage(NamedTuple):
    width: int
    height: int
    maxval: int
    pixels: np.ndarray


def write_frame_pgm(frame: Frame, sink: BinaryIO) -> None:
    """Emit the frame as binary PGM: ``P5\\n<w> <h>\\n255\\n`` + raw bytes."""
    sink.write(f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii"))
    sink.write(frame.pixels.tobytes())


def read_frame_pgm(source: BinaryIO) -> PgmImage:
    """Parse a binary PGM produced by :func:`write_frame_pgm`."""
    data = source.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4 and pos < len(data):
        end = pos
        while end < len(data) and data[end] not in b" \t\n\r":
            end += 1
        fields.append(data[pos:end])
        pos = end + 1
    if len(fields) < 4 or fields[0] != b"P5":
        raise DataError("not a binary PGM (P5) stream")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pixels = np.frombuffer(data, np.uint8, count=width * height, offset=pos)
    return PgmImage(width, height, maxval, pixels.copy())


def frame_filename(window_index: int) -> str:
    return f"frame_{window_index:06d}.pgm"


SYNTH_PATTERNS = ("moving_dot", "moving_edge", "uniform_noise")


def generate_synthetic_events(
    geometry: SensorGeometry,
    duration_us: int,
    pattern: str,
    rate_hz: float = 1_000_000.0,
    seed: int = 0,
) -> np.ndarray:
    """Deterministic synthetic event stream as an EVENT_DTYPE array.

    ``rate_hz`` is the mean event rate in events per second; the count is
    Poisson-distributed and timestamps are uniform over the duration.
    Moving patterns emit +1 at the leading edge of the object and -1 at
    the trailing edge, sweeping across the sensor once per duration.
    """
    if pattern not in SYNTH_PATTERNS:
        raise ConfigError(f"unknown pattern {pattern!r}, expected one of {SYNTH_PATTERNS}")
    if rate_hz <= 0:
        raise ConfigError(f"rate must be positive, got {rate_hz}")
    if duration_us <= 0:
        raise ConfigError(f"duration must be positive, got {duration_us}")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(rate_hz * duration_us / 1e6))
    arr = np.empty(n, EVENT_DTYPE)
    if n == 0:
        return arr
    t = np.sort(rng.integers(0, duration_us, n, dtype=np.int64))
    arr["t"] = t

    if pattern == "uniform_noise":
        arr["x"] = rng.integers(0, geometry.width, n, dtype=np.int32)
        arr["y"] = rng.integers(0, geometry.height, n, dtype=np.int32)
        arr["p"] = rng.choice(np.array([-1, 1], np.int8), n)
        return arr

    leading = rng.integers(0, 2, n, dtype=np.int8).astype(bool)
    arr["p"] = np.where(leading, 1, -1).astype(np.int8)
    # object center sweeps the full width once over the duration
    cx = (t * geometry.width // duration_us).astype(np.int64)
    if pattern == "moving_dot":
        radius = 2
        edge = np.where(leading, cx + radius, cx - radius)
        arr["x"] = (edge % geometry.width).astype(np.int32)
        cy = geometry.height // 2
        wobble = rng.integers(-radius, radius + 1, n, dtype=np.int32)
        arr["y"] = np.clip(cy + wobble, 0, geometry.height - 1)
    else:  # moving_edge: a full-height vertical edge
        gap = 2
        edge = np.where(leading, cx, cx - gap)
        arr["x"] = (edge % geometry.width).astype(np.int32)
        arr["y"] = rng.integers(0, geometry.height, n, dtype=np.int32)
    return arr
