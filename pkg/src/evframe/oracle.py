"""Brute-force reference frames computed from explicit event lists.

This module is the independent check on the streaming pipeline: it
scans every event per pixel in plain Python, applies each
representation's definition directly via its real-valued formula, and
only then rounds to 8-bit gray. It shares nothing with the lookup-table
decode path except the final rounding rule, so table or accumulator
bugs show up as frame mismatches. Performance is explicitly not a goal.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .evio import Frame, SensorGeometry
from .representations import Representation, ReprKind, round_half_up


def _iter_txyp(events):
    """Yield (t, x, y, p) tuples from Event objects, tuples, or a structured array."""
    if isinstance(events, np.ndarray):
        for row in events:
            yield int(row["t"]), int(row["x"]), int(row["y"]), int(row["p"])
        return
    for ev in events:
        if isinstance(ev, tuple):
            yield ev
        else:
            yield ev.t, ev.x, ev.y, ev.p


class DenseWindow:
    """All events of one accumulation window, fully materialized."""

    def __init__(self, t_start: int, t_end: int, events):
        self.t_start = t_start
        self.t_end = t_end
        self.events = list(_iter_txyp(events))
        for t, _, _, _ in self.events:
            if not t_start <= t < t_end:
                raise ValueError(f"event at t={t} outside window [{t_start}, {t_end})")

    @classmethod
    def slice_stream(cls, events, t_start: int, t_end: int) -> "DenseWindow":
        return cls(t_start, t_end, [e for e in _iter_txyp(events) if t_start <= e[0] < t_end])


def _gray_exp(t: int, p: int, t_end: int, tau_us: int) -> int:
    age = t_end - t
    if age < 0 or age > tau_us:
        raise ValueError(f"event age {age} outside [0, {tau_us}]")
    m = round_half_up(127.0 * math.exp((t - t_end) / tau_us))
    return 128 + m if p > 0 else 128 - m


def _gray_freq(total: int) -> int:
    return round_half_up(255.0 / (1.0 + math.exp(-total / 2.0)))


def dense_frame(
    events,
    repr_: Representation,
    geometry: SensorGeometry,
    t_end: int,
    window_index: int = 0,
) -> Frame:
    """Reference frame for one window of events.

    Events are scanned per pixel in timestamp order (stable within equal
    timestamps). Binary marks any event, event-frame and exp-decay keep
    the latest event, event-frequency accumulates the polarity sum with
    per-step clamping to [-16, 15].
    """
    rows = sorted(_iter_txyp(events), key=lambda e: e[0])
    width = geometry.width
    kind = repr_.kind
    if kind is ReprKind.BINARY:
        background = 0
    else:
        background = 128
    pixels = np.full(geometry.n_pixels, background, np.uint8)

    if kind is ReprKind.BINARY:
        for _, x, y, _ in rows:
            pixels[y * width + x] = 255
    elif kind is ReprKind.EVENT_FRAME:
        last: dict[int, int] = {}
        for _, x, y, p in rows:
            last[y * width + x] = p
        for a, p in last.items():
            pixels[a] = 255 if p > 0 else 0
    elif kind is ReprKind.EXP_DECAY:
        latest: dict[int, tuple[int, int]] = {}
        for t, x, y, p in rows:
            latest[y * width + x] = (t, p)
        for a, (t, p) in latest.items():
            pixels[a] = _gray_exp(t, p, t_end, repr_.tau_us)
    else:
        sums: dict[int, int] = {}
        for _, x, y, p in rows:
            a = y * width + x
            v = sums.get(a, 0) + (1 if p > 0 else -1)
            sums[a] = min(15, max(-16, v))
        for a, total in sums.items():
            pixels[a] = _gray_freq(total)

    return Frame(
        width=geometry.width,
        height=geometry.height,
        pixels=pixels,
        t_end=t_end,
        window_index=window_index,
    )


def rolling_frame(
    events,
    n_us: int,
    m_us: int,
    k_us: int,
    emission_index: int,
    repr_: Representation,
    geometry: SensorGeometry,
) -> Frame:
    """Reference frame for one rolling-window emission.

    For each pixel, the latest event whose sub-window index lies in
    (n - N/K, n] is retained; it appears in the output iff its index is
    within the last M/K sub-windows, decoded with t_end = (n+1)*K.
    """
    if k_us <= 0 or not (k_us <= m_us <= n_us) or m_us % k_us or n_us % k_us:
        raise ConfigError(
            f"rolling parameters need K <= M <= N with K dividing both, got ({n_us}, {m_us}, {k_us})"
        )
    n = emission_index
    span = n_us // k_us
    visible_span = m_us // k_us
    t_end = (n + 1) * k_us
    width = geometry.width
    kind = repr_.kind

    latest: dict[int, tuple[int, int, int]] = {}
    for t, x, y, p in sorted(_iter_txyp(events), key=lambda e: e[0]):
        w = t // k_us
        if n - span < w <= n:
            latest[y * width + x] = (t, p, w)

    background = 0 if kind is ReprKind.BINARY else 128
    pixels = np.full(geometry.n_pixels, background, np.uint8)
    for a, (t, p, w) in latest.items():
        if not n - visible_span < w <= n:
            continue
        if kind is ReprKind.BINARY:
            pixels[a] = 255
        elif kind is ReprKind.EVENT_FRAME:
            pixels[a] = 255 if p > 0 else 0
        elif kind is ReprKind.EXP_DECAY:
            pixels[a] = _gray_exp(t, p, t_end, repr_.tau_us)
        else:
            pixels[a] = _gray_freq(1 if p > 0 else -1)

    return Frame(
        width=geometry.width,
        height=geometry.height,
        pixels=pixels,
        t_end=t_end,
        window_index=emission_index,
    )
