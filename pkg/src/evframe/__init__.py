"""Event-camera streams to 8-bit grayscale frames, with the hardware math to back it.

The package converts asynchronous event streams into frames using four
per-pixel representations, models the banked-memory accumulator a
streaming hardware implementation would use (reset-on-read, bounded
FIFO with drop-oldest, rolling windows, count triggering), and
estimates block-RAM budgets against real platform profiles.
"""

from .errors import ConfigError, DataError, EvFrameError, EventParseError, StreamOrderError
from .evio import (
    EVENT_DTYPE,
    Event,
    Frame,
    SensorGeometry,
    generate_synthetic_events,
    load_events,
    parse_event_line,
    read_event_stream,
    read_frame_pgm,
    save_events,
    write_frame_pgm,
)
from .hwmodel import (
    Accumulator,
    EventFifo,
    TimingConfig,
    bank_and_offset,
    map_event_to_address,
    readout_latency_us,
)
from .oracle import DenseWindow, dense_frame, rolling_frame
from .pipeline import (
    Behavioral,
    CountWindow,
    FifoBuffering,
    HardwareTimed,
    Pipeline,
    PingPongBuffering,
    PipelineConfig,
    PipelineStats,
    RollingWindow,
    TimeWindow,
    UnboundedBuffering,
    pipeline_stats,
    run_count_windowed,
    run_rolling_window,
    run_time_windowed,
)
from .representations import (
    DecodeLut,
    Representation,
    ReprKind,
    build_decode_lut,
    decode_cell,
    encode_exp_decay,
    update_cell,
)
from .resources import (
    BUILTIN_PLATFORMS,
    FitReport,
    PlatformProfile,
    ResourceEstimate,
    bits_per_pixel,
    check_platform_fit,
    estimate_blocks,
    estimate_for_config,
    load_platform_profiles,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
