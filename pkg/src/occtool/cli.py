"""Command-line interface tying sources to benchmarks and analyses.

Every subcommand is a thin wrapper over one library operation; its JSON or
CSV output is reproducible from the same inputs. Exit codes: 0 on success,
1 on runtime errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import occ_sim, power_analysis
from .aliasing import classify_levels, estimate_internal_rate, pattern_frequency, spread_stats
from .errors import NoPattern, OcctoolError
from .occ_image import BufferChoice, locate_sensor, parse_image, select_buffer, ticks_to_seconds
from .power_analysis import PowerKind, derive_pfe_series, quadratic_fit
from .reader import (
    DEFAULT_IMAGE_PATH,
    FileSource,
    ReadMode,
    ReplaySource,
    estimate_external_update_rate,
    latency_histogram,
    load_trace,
    sample_loop,
    save_trace,
)

IMAGE_PATH_ENV = "OCCTOOL_IMAGE_PATH"

_LOCATIONS = {0: "system", 1: "processor", 2: "memory", 3: "gpu"}


def _resolve_image_path(args) -> str:
    if getattr(args, "image", None):
        return args.image
    return os.environ.get(IMAGE_PATH_ENV, DEFAULT_IMAGE_PATH)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _write_columns(path: str, rows) -> None:
    # Two-column whitespace-separated data, directly consumable by common
    # plotting tools.
    with open(path, "w") as handle:
        for a, b in rows:
            handle.write(f"{a} {b}\n")


def _cmd_dump(args) -> int:
    path = _resolve_image_path(args)
    with open(path, "rb") as handle:
        image = parse_image(handle.read())
    for index, block in enumerate(image.blocks):
        print(f"block {index}: {block.sensor_count} sensors "
              f"(offsets names={block.names_offset} ping={block.ping_offset} "
              f"pong={block.pong_offset})")
        try:
            choice = select_buffer(block)
        except OcctoolError:
            choice = None
        for flavour, buf in (("ping", block.ping), ("pong", block.pong)):
            marker = " <- selected" if choice is not None and choice.value == flavour else ""
            first_ts = buf.records[0].timestamp if buf.records else 0
            print(f"  {flavour}: valid={int(buf.valid)} first_timestamp={first_ts}"
                  f" ({ticks_to_seconds(first_ts):.6f} s){marker}")
        chosen = (block.ping if choice is BufferChoice.PING else block.pong) if choice else None
        for i, entry in enumerate(block.names):
            line = (f"  [{i}] gsid={entry.gsid} {entry.name:<16} units={entry.units:<4} "
                    f"kind={entry.kind:#06x} location={_LOCATIONS.get(entry.location, entry.location)} "
                    f"rate={entry.freq_mhz_thousandths / 1000:.0f} Sa/s")
            if chosen:
                record = chosen.records[i]
                line += (f" | sample={record.sample} W acc={record.accumulator}"
                         f" tag={record.update_tag}")
            print(line)
    return 0


def _make_source(args):
    if getattr(args, "replay", None):
        return ReplaySource(args.replay, blocks_per_frame=args.frame_blocks,
                            period=args.replay_period)
    return FileSource(_resolve_image_path(args))


def _cmd_monitor(args) -> int:
    source = _make_source(args)
    trace = sample_loop(source, args.sensor, args.count, ReadMode(args.mode))
    save_trace(trace, args.out)
    _emit({"entries": len(trace.entries), "failed_reads": trace.failed_reads,
           "csv": args.out}, None)
    return 0


def _cmd_bench_latency(args) -> int:
    trace = load_trace(args.trace)
    hist = latency_histogram(trace, args.bin_width_us * 1e-6)
    payload = {
        "bin_width_s": hist.bin_width,
        "mean_s": hist.mean,
        "count": hist.count,
        "bins": {str(k): v for k, v in sorted(hist.bins.items())},
    }
    _emit(payload, args.out)
    if args.data:
        _write_columns(args.data,
                       ((k * hist.bin_width, v) for k, v in sorted(hist.bins.items())))
    return 0


def _cmd_update_rate(args) -> int:
    trace = load_trace(args.trace)
    estimate = estimate_external_update_rate(trace, args.window_ms * 1e-3)
    _emit({
        "rate_sa_s": estimate.rate_sa_s,
        "mean_interval_ms": estimate.mean_interval_s * 1e3,
        "changes": estimate.changes,
        "kept_gaps": estimate.kept_gaps,
        "dropped_gaps": estimate.dropped_gaps,
    }, args.out)
    return 0


def _cmd_simulate(args) -> int:
    if args.config:
        config = occ_sim.load_config(args.config)
    else:
        config = occ_sim.standard_config()
    trace = occ_sim.run_experiment(config, args.duration, args.readout_interval,
                                   args.sensor)
    save_trace(trace, args.out)
    summary = {"entries": len(trace.entries), "failed_reads": trace.failed_reads,
               "csv": args.out}
    if args.frames:
        summary["frames"] = occ_sim.record_frames(config, args.duration,
                                                  args.readout_interval, args.frames)
        summary["frames_file"] = args.frames
    _emit(summary, None)
    return 0


def _cmd_analyze_aliasing(args) -> int:
    trace = load_trace(args.trace)
    series = derive_pfe_series(trace)
    report = spread_stats(series, args.ratio_threshold)
    payload = {
        "stddev_direct_w": report.stddev_direct,
        "stddev_pfe_w": report.stddev_pfe,
        "spread_ratio": report.spread_ratio,
        "aliasing_detected": report.aliasing_detected,
        "f_pattern_hz": None,
        "cycles": None,
        "span_s": None,
        "rate_estimate": None,
    }
    if args.low is None or args.high is None:
        direct = series.values(PowerKind.DIRECT)
        low = float(args.low) if args.low is not None else float(np.percentile(direct, 1))
        high = float(args.high) if args.high is not None else float(np.percentile(direct, 99))
    else:
        low, high = args.low, args.high
    try:
        pattern = pattern_frequency(series, low, high)
        payload["f_pattern_hz"] = pattern.f_pattern
        payload["cycles"] = pattern.cycles
        payload["span_s"] = pattern.span
    except NoPattern:
        pattern = None
    pairs = [tuple(map(float, raw.split(":"))) for raw in args.pair]
    if args.workload_hz is not None and pattern is not None:
        pairs.append((args.workload_hz, pattern.f_pattern))
    if pairs:
        estimate = estimate_internal_rate(pairs, nominal=args.nominal)
        payload["rate_estimate"] = {
            "f_sampling_sa_s": estimate.f_sampling,
            "disagreement_hz": estimate.disagreement,
            "pairs": [
                {"f_workload_hz": fw, "f_pattern_hz": fp, "candidates_hz": list(cands)}
                for fw, fp, cands in estimate.per_pair
            ],
        }
    _emit(payload, args.out)
    if args.pattern_data:
        times, labels = classify_levels(series, low, high)
        _write_columns(args.pattern_data, zip(times, labels))
    return 0


def _load_xy_csv(path: str):
    xs, ys = [], []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            first, second = line.split(",")[:2]
            try:
                x, y = float(first), float(second)
            except ValueError:
                continue        # header row
            xs.append(x)
            ys.append(y)
    return xs, ys


def _cmd_fit(args) -> int:
    x, y = _load_xy_csv(args.data)
    fit = quadratic_fit(x, y, degree=args.degree)
    _emit({
        "c0": fit.c0,
        "c1": fit.c1,
        "c2": fit.c2,
        "residual_mape": fit.residual_stats.mape,
        "residual_mae_w": fit.residual_stats.mae,
        "n": fit.residual_stats.n,
    }, args.out)
    if args.curve:
        grid = np.linspace(min(x), max(x), args.curve_points)
        _write_columns(args.curve, zip(grid, fit.predict(grid)))
    return 0


def _cmd_sum_check(args) -> int:
    bulk = derive_pfe_series(load_trace(args.bulk)).of_kind(PowerKind.PFE)
    components = [derive_pfe_series(load_trace(path)).of_kind(PowerKind.PFE)
                  for path in args.component]
    result = power_analysis.component_sum_check(bulk, components,
                                                tolerance=args.tolerance)
    _emit({
        "mape": result.stats.mape,
        "mae_w": result.stats.mae,
        "n": result.stats.n,
    }, args.out)
    if args.residuals:
        _write_columns(args.residuals, zip(result.times, result.residuals))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occtool",
        description="In-band power telemetry toolkit: codec, sampling client, "
                    "simulator, and analyses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_image_args(p):
        p.add_argument("--image", help=f"image file (default: ${IMAGE_PATH_ENV} "
                                        f"or {DEFAULT_IMAGE_PATH})")

    p = sub.add_parser("dump", help="parse an image and pretty-print its contents")
    add_image_args(p)
    p.set_defaults(func=_cmd_dump)

    p = sub.add_parser("monitor", help="sample one sensor in a tight loop, write CSV")
    add_image_args(p)
    p.add_argument("--replay", help="replay a recorded frame stream instead of a file")
    p.add_argument("--frame-blocks", type=int, default=1, help="blocks per replay frame")
    p.add_argument("--replay-period", type=float, default=0.001,
                   help="synthetic seconds between replay frames")
    p.add_argument("--sensor", required=True)
    p.add_argument("--count", type=int, required=True, help="number of readouts")
    p.add_argument("--mode", choices=[m.value for m in ReadMode],
                   default=ReadMode.OPTIMIZED.value)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("bench-latency", help="histogram readout spacings of a trace")
    p.add_argument("--trace", required=True, help="trace CSV from monitor/simulate")
    p.add_argument("--bin-width-us", type=float, default=0.1)
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--data", help="two-column histogram data file")
    p.set_defaults(func=_cmd_bench_latency)

    p = sub.add_parser("update-rate", help="estimate the external update rate of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--window-ms", type=float, default=60.0,
                   help="discard change gaps longer than this window")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.set_defaults(func=_cmd_update_rate)

    p = sub.add_parser("simulate", help="run the simulator and write a readout trace")
    p.add_argument("--config", help="simulator config JSON (default: standard set)")
    p.add_argument("--sensor", required=True)
    p.add_argument("--duration", type=float, required=True, help="host seconds")
    p.add_argument("--readout-interval", type=float, default=0.001,
                   help="host seconds between readouts")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--frames", help="also record one image frame per readout")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze-aliasing",
                       help="spread, beat pattern, and sampling-rate estimate of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--low", type=float, help="low workload power level in W")
    p.add_argument("--high", type=float, help="high workload power level in W")
    p.add_argument("--ratio-threshold", type=float, default=1.5)
    p.add_argument("--workload-hz", type=float,
                   help="workload frequency behind this trace, for rate estimation")
    p.add_argument("--pair", action="append", default=[], metavar="F_WORKLOAD:F_PATTERN",
                   help="extra measured pair for rate estimation (repeatable)")
    p.add_argument("--nominal", type=float, default=2000.0)
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--pattern-data", help="two-column (time, level) classification dump")
    p.set_defaults(func=_cmd_analyze_aliasing)

    p = sub.add_parser("fit", help="least-squares polynomial fit over a two-column CSV")
    p.add_argument("--data", required=True, help="CSV with x,y rows")
    p.add_argument("--degree", type=int, choices=(1, 2), default=2)
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--curve", help="two-column fitted curve data file")
    p.add_argument("--curve-points", type=int, default=200)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sum-check",
                       help="compare a bulk trace against the sum of component traces")
    p.add_argument("--bulk", required=True, help="bulk trace CSV")
    p.add_argument("--component", action="append", required=True,
                   help="component trace CSV (repeatable)")
    p.add_argument("--tolerance", type=float,
                   help="alignment tolerance in seconds (default: half update interval)")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.add_argument("--residuals", help="two-column (time, residual) data file")
    p.set_defaults(func=_cmd_sum_check)

    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OcctoolError, OSError, ValueError) as exc:
        print(f"occtool: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
