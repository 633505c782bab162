"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
bad input data exits 2.
"""


class EvFrameError(Exception):
    """Base class for all evframe errors."""


class ConfigError(EvFrameError):
    """Invalid or inconsistent configuration (geometry, banks, window parameters)."""


class DataError(EvFrameError):
    """Malformed or out-of-contract input data."""


class EventParseError(DataError):
    """A line of event text could not be parsed.

    Carries the 1-based line number and the offending field so callers can
    point at the exact spot in the input file.
    """

    def __init__(self, line_no: int, field: str, message: str):
        self.line_no = line_no
        self.field = field
        super().__init__(f"line {line_no}, field '{field}': {message}")


class StreamOrderError(DataError):
    """Timestamps decreased in a stream that requires non-decreasing order."""

    def __init__(self, prev_t: int, cur_t: int, line_no: int | None = None):
        self.prev_t = prev_t
        self.cur_t = cur_t
        where = f" at line {line_no}" if line_no is not None else ""
        super().__init__(f"timestamp order violation{where}: {prev_t} -> {cur_t}")
