"""On-chip memory budgets for accumulator plus FIFO configurations.

A block holds 32768 data bits and allocates in half-block granularity.
The accumulator needs cell_bits per pixel, split evenly across banks
(each bank rounds up separately, which is where multi-bank configs pay
a small overhead); the FIFO stores whole events at a default 64 bits
per element. Estimates are checked against built-in platform profiles
to decide whether a configuration fits in block RAM at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DataError
from .evio import SensorGeometry
from .representations import CELL_BITS, Representation, ReprKind

#: usable data bits in one block (parity excluded)
BRAM_BLOCK_BITS = 32768

#: event width in the FIFO: packed t, x, y, p
DEFAULT_FIFO_ELEMENT_BITS = 64

#: FIFO depth used for resource comparisons (distinct from the runtime default)
COMPARISON_FIFO_CAPACITY = 512


@dataclass(frozen=True)
class PlatformProfile:
    """Memory capacities of one target board."""

    name: str
    bram_blocks: int
    uram_blocks: int = 0
    external_ram_gb: float = 0.0

    def __post_init__(self):
        if self.bram_blocks < 0 or self.uram_blocks < 0 or self.external_ram_gb < 0:
            raise ConfigError(f"platform {self.name}: capacities must be non-negative")


BUILTIN_PLATFORMS = {
    "zcu104": PlatformProfile("zcu104", bram_blocks=312, uram_blocks=96, external_ram_gb=4.5),
    "kv260": PlatformProfile("kv260", bram_blocks=144, uram_blocks=64, external_ram_gb=4.0),
    "zybo-z7-20": PlatformProfile("zybo-z7-20", bram_blocks=140, uram_blocks=0, external_ram_gb=1.0),
}


def rolling_index_bits(subwindows: int) -> int:
    """Stored bits identifying the sub-window of a rolling cell."""
    if subwindows < 1:
        raise ConfigError(f"subwindows must be >= 1, got {subwindows}")
    return math.ceil(math.log2(subwindows)) if subwindows > 1 else 0


def bits_per_pixel(repr_: Representation | ReprKind, rolling_subwindows: int | None = None) -> int:
    """Stored bits per accumulator cell, including rolling index bits."""
    kind = repr_.kind if isinstance(repr_, Representation) else repr_
    bits = CELL_BITS[kind]
    if rolling_subwindows is not None:
        bits += rolling_index_bits(rolling_subwindows)
    return bits


def roundup_half_blocks(bits: int) -> float:
    """Blocks needed for a bit count, in half-block granularity."""
    if bits < 0:
        raise ConfigError(f"bit count must be non-negative, got {bits}")
    half_blocks = -(-2 * bits // BRAM_BLOCK_BITS)
    return half_blocks / 2


@dataclass(frozen=True)
class ResourceEstimate:
    """Accumulator-plus-FIFO block budget for one configuration."""

    cell_bits: int
    banks: int
    accumulator_bits: int
    fifo_bits: int
    accumulator_blocks: float
    fifo_blocks: float
    pingpong_multiplier: int = 1

    @property
    def bram_blocks(self) -> float:
        return self.pingpong_multiplier * self.accumulator_blocks + self.fifo_blocks


def estimate_blocks(
    repr_: Representation | ReprKind,
    geometry: SensorGeometry = SensorGeometry(),
    banks: int = 1,
    fifo_capacity: int = COMPARISON_FIFO_CAPACITY,
    fifo_element_bits: int = DEFAULT_FIFO_ELEMENT_BITS,
    rolling_subwindows: int | None = None,
    pingpong: bool = False,
) -> ResourceEstimate:
    """Block budget for an accumulator configuration plus its FIFO.

    Each of the ``banks`` memories holds every ``banks``-th pixel and is
    rounded up to half-block granularity on its own.
    """
    if banks < 1:
        raise ConfigError(f"banks must be >= 1, got {banks}")
    if geometry.width % banks:
        raise ConfigError(f"width {geometry.width} not divisible by {banks} banks")
    if fifo_capacity < 0 or fifo_element_bits < 1:
        raise ConfigError("fifo capacity must be >= 0 and element bits >= 1")
    cell_bits = bits_per_pixel(repr_, rolling_subwindows)
    accumulator_bits = cell_bits * geometry.n_pixels
    per_bank_bits = accumulator_bits // banks
    accumulator_blocks = banks * roundup_half_blocks(per_bank_bits)
    fifo_bits = fifo_capacity * fifo_element_bits
    fifo_blocks = roundup_half_blocks(fifo_bits)
    return ResourceEstimate(
        cell_bits=cell_bits,
        banks=banks,
        accumulator_bits=accumulator_bits,
        fifo_bits=fifo_bits,
        accumulator_blocks=accumulator_blocks,
        fifo_blocks=fifo_blocks,
        pingpong_multiplier=2 if pingpong else 1,
    )


def estimate_for_config(config, fifo_element_bits: int = DEFAULT_FIFO_ELEMENT_BITS) -> ResourceEstimate:
    """Derive the estimate from a :class:`~evframe.pipeline.PipelineConfig`."""
    from .pipeline import FifoBuffering, PingPongBuffering, RollingWindow

    rolling = None
    if isinstance(config.trigger, RollingWindow):
        rolling = config.trigger.subwindows
    capacity = (
        config.buffering.capacity
        if isinstance(config.buffering, FifoBuffering)
        else COMPARISON_FIFO_CAPACITY
    )
    return estimate_blocks(
        config.repr,
        geometry=config.geometry,
        banks=config.banks,
        fifo_capacity=capacity,
        fifo_element_bits=fifo_element_bits,
        rolling_subwindows=rolling,
        pingpong=isinstance(config.buffering, PingPongBuffering),
    )


@dataclass(frozen=True)
class FitReport:
    """Whether an estimate fits a platform's block RAM."""

    platform: str
    feasible_bram: bool
    margin_blocks: float
    needs_uram_or_external: bool


def check_platform_fit(estimate: ResourceEstimate, platform: PlatformProfile) -> FitReport:
    """Compare a block budget against one platform profile."""
    total = estimate.bram_blocks
    feasible = total <= platform.bram_blocks
    return FitReport(
        platform=platform.name,
        feasible_bram=feasible,
        margin_blocks=platform.bram_blocks - total,
        needs_uram_or_external=(not feasible)
        and (platform.uram_blocks > 0 or platform.external_ram_gb > 0),
    )


def load_platform_profiles(source) -> dict[str, PlatformProfile]:
    """Read platform profiles from a key-value text file.

    One stanza per platform, blank-line separated, ``key = value`` lines
    with keys name, bram_blocks, uram_blocks, external_ram_gb. Lines
    starting with ``#`` are comments.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="ascii") as fh:
            text = fh.read()
    profiles: dict[str, PlatformProfile] = {}
    for stanza_no, stanza in enumerate(text.split("\n\n"), start=1):
        fields: dict[str, str] = {}
        for line in stanza.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"platform stanza {stanza_no}: expected 'key = value', got {line!r}")
            fields[key.strip()] = value.strip()
        if not fields:
            continue
        if "name" not in fields or "bram_blocks" not in fields:
            raise DataError(f"platform stanza {stanza_no}: 'name' and 'bram_blocks' are required")
        try:
            profile = PlatformProfile(
                name=fields["name"],
                bram_blocks=int(fields["bram_blocks"]),
                uram_blocks=int(fields.get("uram_blocks", "0")),
                external_ram_gb=float(fields.get("external_ram_gb", "0")),
            )
        except ValueError as exc:
            raise DataError(f"platform stanza {stanza_no}: {exc}") from exc
        profiles[profile.name] = profile
    return profiles
