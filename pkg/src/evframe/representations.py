"""Per-pixel representation kernels.

Four stored-cell encodings are supported, each with its own bit width:

* binary (1 bit): did any event hit the pixel.
* event-frame (2 bits): polarity of the latest event (0 none, 1 positive,
  2 negative).
* exp-decay (8 bits): sign-magnitude code for an exponentially decayed
  time surface; bit 7 is the polarity sign, bits 6..0 the magnitude
  ``round(127 * exp(-(t_end - t) / tau))``. Code 0 is reserved for
  "no event" (any in-window event has magnitude >= 47, so the codes
  never collide).
* event-frequency (5 bits): running polarity sum saturated to [-16, 15],
  stored as a 5-bit two's-complement pattern. Decoded through a sigmoid
  to 8-bit gray.

All real-to-integer conversions use a single rounding rule
(:func:`round_half_up`) so outputs are bit-reproducible.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError

if TYPE_CHECKING:
    from .evio import Event


class ReprKind(Enum):
    BINARY = "binary"
    EVENT_FRAME = "event-frame"
    EXP_DECAY = "exp-decay"
    EVENT_FREQUENCY = "event-frequency"

    def __str__(self) -> str:
        return self.value


#: stored bits per pixel, before any rolling-window index bits
CELL_BITS = {
    ReprKind.BINARY: 1,
    ReprKind.EVENT_FRAME: 2,
    ReprKind.EXP_DECAY: 8,
    ReprKind.EVENT_FREQUENCY: 5,
}

# event-frame codes
EF_NONE, EF_POS, EF_NEG = 0, 1, 2

# event-frequency saturation bounds (5-bit two's complement)
FREQ_MIN, FREQ_MAX = -16, 15

#: gray level of a pixel that saw no event
BACKGROUND_GRAY = {
    ReprKind.BINARY: 0,
    ReprKind.EVENT_FRAME: 128,
    ReprKind.EXP_DECAY: 128,
    ReprKind.EVENT_FREQUENCY: 128,
}

_EXP_SIGN_BIT = 0x80
_EXP_MAG_MASK = 0x7F


@dataclass(frozen=True)
class Representation:
    """A representation choice plus its accumulation interval."""

    kind: ReprKind
    tau_us: int = 10_000

    def __post_init__(self):
        if self.tau_us <= 0:
            raise ConfigError(f"tau_us must be positive, got {self.tau_us}")

    @property
    def cell_bits(self) -> int:
        return CELL_BITS[self.kind]


def round_half_up(value: float) -> int:
    """Round to nearest integer, ties away from zero toward +inf."""
    return math.floor(value + 0.5)


def freq_value_to_code(value: int) -> int:
    """Pack a saturated sum in [-16, 15] as a 5-bit two's-complement pattern."""
    return value & 0x1F


def freq_code_to_value(code: int) -> int:
    """Unpack a 5-bit two's-complement pattern to its signed value."""
    return code - 32 if code >= 16 else code


@functools.lru_cache(maxsize=64)
def _exp_magnitude_table(tau_us: int) -> np.ndarray:
    """Magnitude for every whole-microsecond age 0..tau_us.

    This is the lookup-table form of the decayed-magnitude computation;
    batch encoding indexes it directly instead of evaluating exp per event.
    """
    table = np.empty(tau_us + 1, np.uint8)
    for delta in range(tau_us + 1):
        table[delta] = round_half_up(127.0 * math.exp(-delta / tau_us))
    return table


# full tables are cached up to this tau; larger intervals evaluate per
# unique age instead (same formula, no big allocation)
_EXP_TABLE_MAX_TAU = 1 << 20


def encode_exp_decay(t_event: int, t_end: int, tau_us: int, p: int) -> int:
    """Sign-magnitude cell code for one event, decayed to the window end.

    Raises ValueError unless 0 <= t_end - t_event <= tau_us.
    """
    delta = t_end - t_event
    if delta < 0 or delta > tau_us:
        raise ValueError(
            f"event age {delta} outside [0, {tau_us}] (t_event={t_event}, t_end={t_end})"
        )
    m = round_half_up(127.0 * math.exp(-delta / tau_us))
    return (_EXP_SIGN_BIT | m) if p < 0 else m


def encode_exp_decay_batch(
    t_events: np.ndarray, t_end: int, tau_us: int, p: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`encode_exp_decay` over event arrays."""
    delta = t_end - t_events.astype(np.int64)
    if delta.size:
        dmin, dmax = int(delta.min()), int(delta.max())
        if dmin < 0 or dmax > tau_us:
            raise ValueError(f"event age outside [0, {tau_us}]: saw [{dmin}, {dmax}]")
    if tau_us <= _EXP_TABLE_MAX_TAU:
        m = _exp_magnitude_table(tau_us)[delta]
    else:
        uniq, inverse = np.unique(delta, return_inverse=True)
        mags = np.array(
            [round_half_up(127.0 * math.exp(-int(d) / tau_us)) for d in uniq],
            np.uint8,
        )
        m = mags[inverse]
    codes = m.astype(np.uint8)
    codes[p < 0] |= _EXP_SIGN_BIT
    return codes


def update_cell(repr_: Representation, old: int, event: "Event", t_end: int) -> int:
    """Next stored value for one cell after an event arrival.

    Binary sets the cell; event-frame and exp-decay overwrite with the
    latest event; event-frequency adds the polarity with saturation.
    """
    kind = repr_.kind
    if kind is ReprKind.BINARY:
        return 1
    if kind is ReprKind.EVENT_FRAME:
        return EF_POS if event.p > 0 else EF_NEG
    if kind is ReprKind.EXP_DECAY:
        return encode_exp_decay(event.t, t_end, repr_.tau_us, event.p)
    # event frequency: saturating +-1
    step = 1 if event.p > 0 else -1
    return min(FREQ_MAX, max(FREQ_MIN, old + step))


def decode_cell(repr_: Representation, code: int) -> int:
    """8-bit gray value for a stored cell.

    For event-frequency the stored value is the signed saturated sum in
    [-16, 15]; the other kinds store unsigned bit patterns. Unused
    event-frame pattern 3 decodes to background so the lookup table is
    total over the code space.
    """
    kind = repr_.kind
    if kind is ReprKind.BINARY:
        return 255 if code else 0
    if kind is ReprKind.EVENT_FRAME:
        if code == EF_POS:
            return 255
        if code == EF_NEG:
            return 0
        return 128
    if kind is ReprKind.EXP_DECAY:
        if code == 0:
            return 128
        m = code & _EXP_MAG_MASK
        return 128 - m if code & _EXP_SIGN_BIT else 128 + m
    # event frequency: sigmoid of the saturated sum
    return round_half_up(255.0 / (1.0 + math.exp(-code / 2.0)))


@dataclass(frozen=True)
class DecodeLut:
    """Immutable code -> gray table, one entry per possible bit pattern."""

    kind: ReprKind
    table: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.table)

    def gray(self, code: int) -> int:
        """Decode a single stored value through the table."""
        if self.kind is ReprKind.EVENT_FREQUENCY:
            code = freq_value_to_code(code)
        return int(self.table[code])


def build_decode_lut(repr_: Representation) -> DecodeLut:
    """Precompute the decode table for a representation.

    Table index is the raw stored bit pattern; event-frequency indices
    are the two's-complement packing of the signed sum.
    """
    bits = CELL_BITS[repr_.kind]
    size = 1 << bits
    table = np.empty(size, np.uint8)
    for code in range(size):
        if repr_.kind is ReprKind.EVENT_FREQUENCY:
            table[code] = decode_cell(repr_, freq_code_to_value(code))
        else:
            table[code] = decode_cell(repr_, code)
    table.setflags(write=False)
    return DecodeLut(kind=repr_.kind, table=table)
