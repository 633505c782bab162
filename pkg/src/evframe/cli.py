"""Command-line surface: convert, estimate, synth, compare.

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
error, 3 comparison mismatch.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .evio import (
    SYNTH_PATTERNS,
    SensorGeometry,
    frame_filename,
    generate_synthetic_events,
    load_events,
    save_events,
    write_frame_pgm,
)
from .hwmodel import DEFAULT_FIFO_CAPACITY, TimingConfig
from .oracle import dense_frame, rolling_frame
from .pipeline import (
    Behavioral,
    CountWindow,
    FifoBuffering,
    HardwareTimed,
    Pipeline,
    PingPongBuffering,
    PipelineConfig,
    RollingWindow,
    TimeWindow,
    UnboundedBuffering,
)
from .representations import Representation, ReprKind
from .resources import (
    BUILTIN_PLATFORMS,
    COMPARISON_FIFO_CAPACITY,
    DEFAULT_FIFO_ELEMENT_BITS,
    check_platform_fit,
    estimate_blocks,
    load_platform_profiles,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MISMATCH = 3

_REPR_CHOICES = [k.value for k in ReprKind]


class _ArgumentParser(argparse.ArgumentParser):
    """argparse, but usage errors exit with code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_geometry_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=1280, help="sensor width in pixels")
    p.add_argument("--height", type=int, default=720, help="sensor height in pixels")


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--repr",
        dest="repr_kind",
        choices=_REPR_CHOICES,
        default="event-frame",
        help="pixel representation",
    )
    p.add_argument("--tau-us", type=int, default=10_000,
                   help="accumulation interval in microseconds (time windows and decay)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--count", type=int, default=None, metavar="Z",
                       help="emit a frame every Z events instead of every tau-us")
    group.add_argument("--rolling", type=str, default=None, metavar="N,M,K",
                       help="rolling window: accumulate N us, emit every K us covering the last M us")
    p.add_argument("--banks", type=int, default=1,
                   help="parallel memory banks (X pixels per clock on readout)")
    p.add_argument("--buffering", choices=["fifo", "pingpong", "unbounded"], default="fifo")
    p.add_argument("--fifo-capacity", type=int, default=DEFAULT_FIFO_CAPACITY)
    p.add_argument("--hardware-timed", action="store_true",
                   help="model readout latency; events arriving during readout queue up")
    p.add_argument("--clock-hz", type=int, default=100_000_000)
    p.add_argument("--order", choices=["strict", "sort", "warn"], default="strict",
                   help="timestamp order policy for the input stream")
    p.add_argument("--flush", action="store_true",
                   help="emit the final partial window")
    _add_geometry_args(p)


def _add_synth_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pattern", choices=SYNTH_PATTERNS, default="moving_dot")
    p.add_argument("--rate", type=float, default=1_000_000.0, help="mean events per second")
    p.add_argument("--duration-us", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)


def _parse_rolling(spec: str) -> RollingWindow:
    parts = spec.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--rolling expects N,M,K microseconds, got {spec!r}")
    try:
        n, m, k = (int(v) for v in parts)
    except ValueError:
        raise ConfigError(f"--rolling expects integers, got {spec!r}") from None
    return RollingWindow(n_us=n, m_us=m, k_us=k)


def _config_from_args(args) -> PipelineConfig:
    geometry = SensorGeometry(args.width, args.height)
    repr_ = Representation(ReprKind(args.repr_kind), tau_us=args.tau_us)
    if args.rolling is not None:
        trigger = _parse_rolling(args.rolling)
    elif args.count is not None:
        trigger = CountWindow(args.count)
    else:
        trigger = TimeWindow(args.tau_us)
    if args.buffering == "pingpong":
        buffering = PingPongBuffering()
    elif args.buffering == "unbounded":
        buffering = UnboundedBuffering()
    else:
        buffering = FifoBuffering(args.fifo_capacity)
    if args.hardware_timed:
        timing_mode = HardwareTimed(TimingConfig(args.clock_hz, pixels_per_clock=args.banks))
    else:
        timing_mode = Behavioral()
    return PipelineConfig(
        repr=repr_,
        geometry=geometry,
        banks=args.banks,
        trigger=trigger,
        buffering=buffering,
        timing_mode=timing_mode,
    )


def _load_input_events(args, geometry: SensorGeometry):
    if getattr(args, "synthetic", None):
        return generate_synthetic_events(
            geometry, args.duration_us, args.synthetic, rate_hz=args.rate, seed=args.seed
        )
    if args.input is None:
        raise ConfigError("an input file or --synthetic pattern is required")
    return load_events(args.input, geometry, order_policy=args.order)


def cmd_convert(args) -> int:
    config = _config_from_args(args)
    events = load_events(args.input, config.geometry, order_policy=args.order)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipe = Pipeline(config)
    written = 0
    for frame in pipe.iter_frames(events, flush=args.flush):
        with open(out_dir / frame_filename(frame.window_index), "wb") as sink:
            write_frame_pgm(frame, sink)
        written += 1
    stats = pipe.stats
    (out_dir / "stats.txt").write_text("\n".join(stats.as_kv_lines()) + "\n", encoding="ascii")
    print(f"wrote {written} frames to {out_dir} "
          f"({stats.events_processed} events processed, {stats.events_dropped} dropped)")
    return EXIT_OK


def cmd_synth(args) -> int:
    geometry = SensorGeometry(args.width, args.height)
    events = generate_synthetic_events(
        geometry, args.duration_us, args.pattern, rate_hz=args.rate, seed=args.seed
    )
    save_events(args.output, events)
    print(f"wrote {len(events)} events to {args.output}")
    return EXIT_OK


def _oracle_frames(events, config: PipelineConfig, flush: bool):
    """Reference frame sequence mirroring the pipeline's emission rule."""
    t = events["t"]
    if t.size == 0:
        return []
    frames = []
    repr_ = config.repr
    geom = config.geometry
    if isinstance(config.trigger, TimeWindow):
        tau = config.trigger.tau_us
        n_full = int(t[-1]) // tau
        windows = list(range(n_full)) + ([n_full] if flush else [])
        for w in windows:
            lo, hi = np.searchsorted(t, [w * tau, (w + 1) * tau])
            frames.append(
                dense_frame(events[lo:hi], repr_, geom, t_end=(w + 1) * tau, window_index=w)
            )
    elif isinstance(config.trigger, CountWindow):
        z = config.trigger.count
        starts = list(range(0, len(t) - z + 1, z))
        for idx, lo in enumerate(starts):
            block = events[lo : lo + z]
            t_end = int(block["t"][-1])
            win_repr = repr_
            if repr_.kind is ReprKind.EXP_DECAY:
                win_repr = Representation(repr_.kind, max(1, t_end - int(block["t"][0])))
            frames.append(dense_frame(block, win_repr, geom, t_end=t_end, window_index=idx))
        remainder = len(t) % z
        if flush and remainder:
            block = events[len(t) - remainder :]
            t_end = int(block["t"][-1])
            win_repr = repr_
            if repr_.kind is ReprKind.EXP_DECAY:
                win_repr = Representation(repr_.kind, max(1, t_end - int(block["t"][0])))
            frames.append(
                dense_frame(block, win_repr, geom, t_end=t_end, window_index=len(starts))
            )
    else:
        trig = config.trigger
        n_full = int(t[-1]) // trig.k_us
        emissions = list(range(n_full)) + ([n_full] if flush else [])
        for w in emissions:
            frames.append(
                rolling_frame(events, trig.n_us, trig.m_us, trig.k_us, w, repr_, geom)
            )
    return frames


def cmd_compare(args) -> int:
    config = _config_from_args(args)
    events = _load_input_events(args, config.geometry)
    pipe = Pipeline(config)
    got = pipe.run(events, flush=args.flush)
    expected = _oracle_frames(events, config, flush=args.flush)
    if len(got) != len(expected):
        print(f"mismatch: pipeline emitted {len(got)} frames, reference expects {len(expected)}")
        return EXIT_MISMATCH
    for i, (g, e) in enumerate(zip(got, expected)):
        if not np.array_equal(g.pixels, e.pixels):
            diff = np.nonzero(g.pixels != e.pixels)[0]
            pixel = int(diff[0])
            print(
                f"mismatch: frame {i} pixel {pixel} "
                f"expected {int(e.pixels[pixel])} got {int(g.pixels[pixel])} "
                f"({diff.size} differing pixels)"
            )
            return EXIT_MISMATCH
        if (g.t_end, g.window_index) != (e.t_end, e.window_index):
            print(f"mismatch: frame {i} metadata "
                  f"expected (t_end={e.t_end}, index={e.window_index}) "
                  f"got (t_end={g.t_end}, index={g.window_index})")
            return EXIT_MISMATCH
    print(f"identical: {len(got)} frames, {pipe.stats.events_processed} events processed, "
          f"{pipe.stats.events_dropped} dropped")
    return EXIT_OK


def _resolve_platforms(args) -> dict:
    platforms = dict(BUILTIN_PLATFORMS)
    if args.platforms_file:
        platforms.update(load_platform_profiles(args.platforms_file))
    if args.platform:
        missing = [name for name in args.platform if name not in platforms]
        if missing:
            raise ConfigError(
                f"unknown platform(s): {', '.join(missing)}; known: {', '.join(sorted(platforms))}"
            )
        return {name: platforms[name] for name in args.platform}
    return platforms


def cmd_estimate(args) -> int:
    geometry = SensorGeometry(args.width, args.height)
    estimate = estimate_blocks(
        ReprKind(args.repr_kind),
        geometry=geometry,
        banks=args.banks,
        fifo_capacity=args.fifo_capacity,
        fifo_element_bits=args.fifo_bits,
        rolling_subwindows=args.rolling_subwindows,
        pingpong=args.pingpong,
    )
    platforms = _resolve_platforms(args)
    reports = [check_platform_fit(estimate, p) for p in platforms.values()]
    if args.format == "kv":
        print(f"cell_bits={estimate.cell_bits}")
        print(f"banks={estimate.banks}")
        print(f"accumulator_blocks={estimate.accumulator_blocks}")
        print(f"fifo_blocks={estimate.fifo_blocks}")
        print(f"pingpong_multiplier={estimate.pingpong_multiplier}")
        print(f"total_blocks={estimate.bram_blocks}")
        for rep in reports:
            prefix = f"platform.{rep.platform}"
            print(f"{prefix}.feasible={str(rep.feasible_bram).lower()}")
            print(f"{prefix}.margin_blocks={rep.margin_blocks}")
            print(f"{prefix}.needs_uram_or_external={str(rep.needs_uram_or_external).lower()}")
    else:
        print(f"representation: {args.repr_kind}"
              + (f" + rolling index ({args.rolling_subwindows} sub-windows)"
                 if args.rolling_subwindows else ""))
        print(f"cell bits: {estimate.cell_bits}")
        print(f"accumulator: {estimate.accumulator_blocks} blocks across {estimate.banks} bank(s)"
              + (" x2 (ping-pong)" if estimate.pingpong_multiplier == 2 else ""))
        print(f"fifo: {estimate.fifo_blocks} blocks "
              f"({args.fifo_capacity} x {args.fifo_bits} bits)")
        print(f"total: {estimate.bram_blocks} blocks")
        for rep in reports:
            verdict = "feasible" if rep.feasible_bram else "infeasible"
            line = f"  {rep.platform}: {verdict}, margin {rep.margin_blocks} blocks"
            if rep.needs_uram_or_external:
                line += " (needs Ultra RAM or external memory)"
            print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="evframe",
        description="Convert event-camera streams to 8-bit grayscale frames and "
        "budget the accumulator hardware that would do it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="event CSV to PGM frame sequence")
    _add_pipeline_args(p_convert)
    p_convert.add_argument("input", help="input event CSV (t,x,y,p per line)")
    p_convert.add_argument("output_dir", help="directory for frame_NNNNNN.pgm and stats.txt")
    p_convert.set_defaults(func=cmd_convert)

    p_synth = sub.add_parser("synth", help="generate a synthetic event CSV")
    _add_synth_args(p_synth)
    _add_geometry_args(p_synth)
    p_synth.add_argument("output", help="output CSV path")
    p_synth.set_defaults(func=cmd_synth)

    p_estimate = sub.add_parser("estimate", help="block RAM budget and platform fit")
    p_estimate.add_argument("--repr", dest="repr_kind", choices=_REPR_CHOICES, required=True)
    p_estimate.add_argument("--rolling-subwindows", type=int, default=None, metavar="S",
                            help="add rolling-window index bits for S sub-windows")
    p_estimate.add_argument("--banks", type=int, default=1)
    p_estimate.add_argument("--fifo-capacity", type=int, default=COMPARISON_FIFO_CAPACITY)
    p_estimate.add_argument("--fifo-bits", type=int, default=DEFAULT_FIFO_ELEMENT_BITS)
    p_estimate.add_argument("--pingpong", action="store_true")
    p_estimate.add_argument("--platform", action="append", default=None,
                            help="platform name (repeatable; default: all built-in)")
    p_estimate.add_argument("--platforms-file", default=None,
                            help="extra platform profiles (key = value stanzas)")
    p_estimate.add_argument("--format", choices=["table", "kv"], default="table")
    _add_geometry_args(p_estimate)
    p_estimate.set_defaults(func=cmd_estimate)

    p_compare = sub.add_parser("compare", help="pipeline vs. dense reference, bit for bit")
    _add_pipeline_args(p_compare)
    p_compare.add_argument("--synthetic", choices=SYNTH_PATTERNS, default=None,
                           help="compare on a generated stream instead of a file")
    p_compare.add_argument("--rate", type=float, default=1_000_000.0)
    p_compare.add_argument("--duration-us", type=int, default=100_000)
    p_compare.add_argument("--seed", type=int, default=0)
    p_compare.add_argument("input", nargs="?", default=None, help="input event CSV")
    p_compare.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"evframe: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"evframe: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
