import numpy as np
import pytest

from evframe import EVENT_DTYPE, SensorGeometry


@pytest.fixture
def small_geometry():
    return SensorGeometry(64, 48)


def random_stream(geometry, n_events, duration_us, seed, distinct_timestamps=False):
    """Sorted random event array for exercising pipelines."""
    rng = np.random.default_rng(seed)
    arr = np.empty(n_events, EVENT_DTYPE)
    if distinct_timestamps:
        ts = rng.choice(duration_us, size=n_events, replace=False)
    else:
        ts = rng.integers(0, duration_us, n_events)
    arr["t"] = np.sort(ts)
    arr["x"] = rng.integers(0, geometry.width, n_events)
    arr["y"] = rng.integers(0, geometry.height, n_events)
    arr["p"] = rng.choice(np.array([-1, 1], np.int8), n_events)
    return arr
