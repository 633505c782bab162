"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from evframe import (
    BUILTIN_PLATFORMS,
    EVENT_DTYPE,
    Behavioral,
    EventFifo,
    FifoBuffering,
    HardwareTimed,
    Pipeline,
    PingPongBuffering,
    PipelineConfig,
    Representation,
    ReprKind,
    RollingWindow,
    SensorGeometry,
    TimeWindow,
    TimingConfig,
    check_platform_fit,
    decode_cell,
    dense_frame,
    estimate_blocks,
    generate_synthetic_events,
    readout_latency_us,
    rolling_frame,
    run_rolling_window,
    run_time_windowed,
    save_events,
)
from evframe.cli import main as cli_main
from evframe.representations import EF_NEG, EF_NONE, EF_POS
from tests.conftest import random_stream

HD = SensorGeometry()
DESK = SensorGeometry(64, 48)

ALL_KINDS = (ReprKind.BINARY, ReprKind.EVENT_FRAME, ReprKind.EXP_DECAY,
             ReprKind.EVENT_FREQUENCY)


@contextmanager
def criterion(number, title):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {number}: {title}")
        raise
    print(f"[PASS] criterion {number}: {title}")


def overload_stream(seed=0, n_burst=40_000):
    """A burst landing entirely inside the 9216 us HD readout window."""
    rng = np.random.default_rng(seed)
    t = np.concatenate([[5_000], np.sort(rng.integers(10_000, 19_216, n_burst))])
    arr = np.empty(len(t), EVENT_DTYPE)
    arr["t"] = t
    arr["x"] = rng.integers(0, HD.width, len(t))
    arr["y"] = rng.integers(0, HD.height, len(t))
    arr["p"] = rng.choice(np.array([-1, 1], np.int8), len(t))
    return arr


def test_criterion_01_block_budget_reproduction():
    """Exact block counts for the five stock configurations."""
    with criterion(1, "block budgets 29.5 / 57.5 / 226 / 142 (+rolling 142), exact"):
        start = time.perf_counter()
        expected = {
            ReprKind.BINARY: 29.5,
            ReprKind.EVENT_FRAME: 57.5,
            ReprKind.EXP_DECAY: 226.0,
            ReprKind.EVENT_FREQUENCY: 142.0,
        }
        for kind, blocks in expected.items():
            est = estimate_blocks(kind, geometry=HD, banks=1,
                                  fifo_capacity=512, fifo_element_bits=64)
            assert est.bram_blocks == blocks, (kind, est.bram_blocks)
        rolling = estimate_blocks(ReprKind.EVENT_FRAME, geometry=HD, banks=1,
                                  fifo_capacity=512, fifo_element_bits=64,
                                  rolling_subwindows=8)
        assert rolling.cell_bits == 5
        assert rolling.bram_blocks == 142.0
        assert time.perf_counter() - start < 0.1  # milliseconds-scale


def test_criterion_02_multi_bank_budget():
    """Eight banks of 2-bit cells cost 61 blocks (bank count inferred)."""
    with criterion(2, "multi-bank event-frame budget is 61 blocks at X=8, exact"):
        est = estimate_blocks(ReprKind.EVENT_FRAME, geometry=HD, banks=8,
                              fifo_capacity=512, fifo_element_bits=64)
        assert est.bram_blocks == 61.0


def test_criterion_03_platform_verdicts():
    """Fit booleans match the published platform conclusions."""
    with criterion(3, "platform fit verdicts (zybo / zcu104 / kv260), exact booleans"):
        stock = {kind: estimate_blocks(kind, geometry=HD, fifo_capacity=512)
                 for kind in ALL_KINDS}
        rolling = estimate_blocks(ReprKind.EVENT_FRAME, geometry=HD,
                                  fifo_capacity=512, rolling_subwindows=8)
        all_five = list(stock.values()) + [rolling]

        zybo = BUILTIN_PLATFORMS["zybo-z7-20"]
        feasible_on_zybo = {kind: check_platform_fit(est, zybo).feasible_bram
                            for kind, est in stock.items()}
        assert feasible_on_zybo == {
            ReprKind.BINARY: True,
            ReprKind.EVENT_FRAME: True,
            ReprKind.EXP_DECAY: False,
            ReprKind.EVENT_FREQUENCY: False,
        }
        assert not check_platform_fit(rolling, zybo).feasible_bram

        zcu104 = BUILTIN_PLATFORMS["zcu104"]
        assert all(check_platform_fit(est, zcu104).feasible_bram for est in all_five)

        kv260 = BUILTIN_PLATFORMS["kv260"]
        exp_fit = check_platform_fit(stock[ReprKind.EXP_DECAY], kv260)
        assert not exp_fit.feasible_bram
        assert exp_fit.needs_uram_or_external


def test_criterion_04_oracle_equivalence():
    """Behavioral pipeline equals the dense reference on 100 random streams."""
    with criterion(4, "pipeline == dense reference, 4 reprs x 100 seeds, bit-exact, <60 s"):
        start = time.perf_counter()
        tau = 10_000
        duration = 30_000
        mismatching_pixels = 0
        for kind in ALL_KINDS:
            repr_ = Representation(kind)
            cfg = PipelineConfig(repr=repr_, geometry=DESK, trigger=TimeWindow(tau))
            for seed in range(100):
                events = random_stream(DESK, 10_000, duration, seed=seed)
                frames, _ = run_time_windowed(events, cfg, flush=True)
                t = events["t"]
                for frame in frames:
                    w = frame.window_index
                    lo, hi = np.searchsorted(t, [w * tau, (w + 1) * tau])
                    expected = dense_frame(events[lo:hi], repr_, DESK,
                                           t_end=(w + 1) * tau, window_index=w)
                    mismatching_pixels += int(np.sum(frame.pixels != expected.pixels))
        elapsed = time.perf_counter() - start
        assert mismatching_pixels == 0
        assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s"


def test_criterion_05_bank_invariance():
    """Frames are byte-identical for 1, 2, 4 and 8 banks."""
    with criterion(5, "bank invariance across X in {1, 2, 4, 8}, byte-identical"):
        tau = 10_000
        for kind in ALL_KINDS:
            repr_ = Representation(kind)
            for seed in range(100):
                events = random_stream(DESK, 10_000, 30_000, seed=seed)
                reference = None
                for banks in (1, 2, 4, 8):
                    cfg = PipelineConfig(repr=repr_, geometry=DESK, banks=banks,
                                         trigger=TimeWindow(tau))
                    frames, _ = run_time_windowed(events, cfg, flush=True)
                    blob = b"".join(f.pixels.tobytes() for f in frames)
                    if reference is None:
                        reference = blob
                    else:
                        assert blob == reference, (kind, seed, banks)


def test_criterion_06_rolling_equivalence():
    """Rolling pipeline equals the rolling reference on 50 random streams."""
    with criterion(6, "rolling window == reference, 3 parameter sets x 50 seeds, bit-exact"):
        configs = [(8_000, 4_000, 1_000), (4_000, 2_000, 1_000), (4_000, 4_000, 2_000)]
        repr_ = Representation(ReprKind.EVENT_FRAME)
        for nmk in configs:
            for seed in range(50):
                events = random_stream(DESK, 2_000, 16_000, seed=seed)
                cfg = PipelineConfig(repr=repr_, geometry=DESK, trigger=RollingWindow(*nmk))
                frames, _ = run_rolling(events, cfg)
                assert frames
                for frame in frames:
                    expected = rolling_frame(events, *nmk, frame.window_index, repr_, DESK)
                    assert np.array_equal(frame.pixels, expected.pixels), (nmk, seed)
        # lighter sweep over the remaining representations
        for kind in (ReprKind.BINARY, ReprKind.EXP_DECAY, ReprKind.EVENT_FREQUENCY):
            repr_ = Representation(kind)
            for nmk in configs:
                for seed in range(5):
                    events = random_stream(DESK, 2_000, 16_000, seed=seed)
                    cfg = PipelineConfig(repr=repr_, geometry=DESK,
                                         trigger=RollingWindow(*nmk))
                    frames, _ = run_rolling(events, cfg)
                    for frame in frames:
                        expected = rolling_frame(events, *nmk, frame.window_index,
                                                 repr_, DESK)
                        assert np.array_equal(frame.pixels, expected.pixels)


def run_rolling(events, cfg):
    return run_rolling_window(events, cfg, flush=True)


def _fifo_law_holds(fifo, pushes, popped_set, capacity):
    retained = list(fifo.snapshot())
    alive = [v for v in pushes if v not in popped_set]
    assert len(retained) <= capacity
    assert retained == alive[len(alive) - len(retained):]
    total_drops = fifo.drop_count + fifo.write_mode_drop_count
    assert fifo.push_count == fifo.pop_count + fifo.occupancy + total_drops


def _exhaust_fifo(capacity, max_depth):
    """Walk every push/pop/mode sequence up to max_depth, checking the law."""
    fifo = EventFifo(capacity)
    pushes = []
    popped = set()
    next_val = [0]

    def dfs(depth):
        if depth == max_depth:
            return
        for op in range(3):
            if op < 2:  # push in read mode (0) or write mode (1)
                value = next_val[0]
                next_val[0] += 1
                was_max = fifo.max_occupancy
                evicted = fifo.snapshot()[0] if fifo.occupancy >= capacity else None
                fifo.push(value, in_read_mode=(op == 0))
                pushes.append(value)
                _fifo_law_holds(fifo, pushes, popped, capacity)
                dfs(depth + 1)
                # undo
                fifo._q.pop()
                fifo.push_count -= 1
                fifo.max_occupancy = was_max
                if evicted is not None:
                    fifo._q.appendleft(evicted)
                    if op == 0:
                        fifo.drop_count -= 1
                    else:
                        fifo.write_mode_drop_count -= 1
                pushes.pop()
                next_val[0] -= 1
            else:  # pop
                value = fifo.pop()
                if value is not None:
                    popped.add(value)
                _fifo_law_holds(fifo, pushes, popped, capacity)
                dfs(depth + 1)
                if value is not None:
                    fifo._q.appendleft(value)
                    fifo.pop_count -= 1
                    popped.discard(value)

    dfs(0)


def test_criterion_07_fifo_drop_oldest_law():
    """Retained = newest <=capacity unpopped pushes; counters conserve."""
    with criterion(7, "drop-oldest law, exhaustive (cap<=8, len<=12) + randomized at 32768"):
        for capacity in range(1, 9):
            _exhaust_fifo(capacity, max_depth=12)
        # randomized at the architectural capacity
        rng = np.random.default_rng(0)
        fifo = EventFifo(32768)
        pushes = []
        popped = set()
        for step in range(120_000):
            if rng.random() < 0.7:
                fifo.push(step, in_read_mode=bool(rng.integers(2)))
                pushes.append(step)
            else:
                value = fifo.pop()
                if value is not None:
                    popped.add(value)
            if step % 10_000 == 0:
                _fifo_law_holds(fifo, pushes, popped, 32768)
        _fifo_law_holds(fifo, pushes, popped, 32768)


def test_criterion_08_readout_latency_scaling():
    """latency(X) * X = 9216 us at HD and 100 MHz, exactly."""
    with criterion(8, "readout latency scaling: latency(X) * X == 9216 us, exact"):
        for banks in (1, 2, 4, 8):
            latency = readout_latency_us(HD, TimingConfig(pixels_per_clock=banks))
            assert latency * banks == 9216
        assert readout_latency_us(HD, TimingConfig()) == 9216


def test_criterion_09_decode_fixed_points():
    """Published gray levels for event-frame codes and frequency endpoints."""
    with criterion(9, "decode fixed points: event-frame 255/0/128, frequency 0/255/128"):
        event_frame = Representation(ReprKind.EVENT_FRAME)
        assert decode_cell(event_frame, EF_POS) == 255
        assert decode_cell(event_frame, EF_NEG) == 0
        assert decode_cell(event_frame, EF_NONE) == 128
        freq = Representation(ReprKind.EVENT_FREQUENCY)
        assert decode_cell(freq, -16) == 0
        assert decode_cell(freq, 15) == 255
        assert decode_cell(freq, 0) == 128


def test_criterion_10_pingpong_losslessness():
    """Ping-pong output equals behavioral on a stream that overloads the FIFO."""
    with criterion(10, "ping-pong == behavioral on overload, zero drops, exact"):
        events = overload_stream(seed=1)
        repr_ = Representation(ReprKind.EVENT_FRAME)
        base = PipelineConfig(repr=repr_, geometry=HD, trigger=TimeWindow(10_000))

        lossy = Pipeline(PipelineConfig(
            repr=repr_, geometry=HD, trigger=TimeWindow(10_000),
            buffering=FifoBuffering(32768), timing_mode=HardwareTimed(TimingConfig()),
        ))
        lossy_frames = lossy.run(events, flush=True)
        assert lossy.stats.events_dropped > 0  # the stream does overload

        pingpong = Pipeline(PipelineConfig(
            repr=repr_, geometry=HD, trigger=TimeWindow(10_000),
            buffering=PingPongBuffering(), timing_mode=HardwareTimed(TimingConfig()),
        ))
        pp_frames = pingpong.run(events, flush=True)
        behavioral_frames, _ = run_time_windowed(events, base, flush=True)

        assert pingpong.stats.events_dropped == 0
        assert len(pp_frames) == len(behavioral_frames)
        for a, b in zip(pp_frames, behavioral_frames):
            assert a == b
        assert any(not np.array_equal(a.pixels, b.pixels)
                   for a, b in zip(lossy_frames, behavioral_frames))


def test_criterion_11_convert_throughput(tmp_path):
    """convert sustains at least 10 million events per second at HD."""
    with criterion(11, "convert throughput >= 10 M events/s, HD event-frame"):
        rng = np.random.default_rng(0)
        n = 12_000_000
        arr = np.empty(n, EVENT_DTYPE)
        arr["t"] = np.sort(rng.integers(0, 100_000, n).astype(np.int64))
        arr["x"] = rng.integers(0, HD.width, n)
        arr["y"] = rng.integers(0, HD.height, n)
        arr["p"] = rng.choice(np.array([-1, 1], np.int8), n)
        csv_path = tmp_path / "throughput.csv"
        save_events(csv_path, arr)
        out_dir = tmp_path / "frames"

        def one_run():
            start = time.perf_counter()
            code = cli_main(["convert", "--repr", "event-frame", "--tau-us", "10000",
                             "--flush", str(csv_path), str(out_dir)])
            elapsed = time.perf_counter() - start
            assert code == 0
            return n / elapsed

        one_run()  # warm the page cache and import paths
        best = max(one_run() for _ in range(3))
        print(f"  measured convert throughput: {best/1e6:.1f} M events/s")
        assert best >= 10_000_000, f"throughput {best/1e6:.1f} M events/s"
