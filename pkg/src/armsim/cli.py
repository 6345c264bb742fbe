"""Command-line front door.

`armsim run` executes one canned experiment and writes the trace CSV plus
a flat metrics file; `armsim reproduce` re-runs the reference rig's
benchmark tables and prints a side-by-side report; `armsim serve` starts
the live teleoperation service.

Exit codes: 0 success, 2 configuration error, 3 operating-limit violation
flagged during an otherwise successful run (the outputs are still written).
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .simkit import ConfigError, write_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3


def _load(config_path):
    if config_path:
        return experiments.load_config(config_path)
    return experiments.load_default_config()


def cmd_run(args) -> int:
    cfg = _load(args.config)
    trace, metrics = experiments.run_experiment(
        cfg, args.axis, args.experiment, amplitude=args.amplitude,
        freq=args.freq, duration=args.duration)
    write_trace_csv(args.out, trace)
    lines = experiments.metrics_lines(trace, metrics, cfg)
    with open(args.metrics, "w") as f:
        f.write("\n".join(lines) + "\n")
    print(f"trace -> {args.out}")
    print(f"metrics -> {args.metrics}")
    if trace.meta.get("latency_violation"):
        print(f"LIMIT VIOLATION: observed command delay "
              f"{trace.meta['max_delay_ms']:.1f} ms exceeds the 500 ms "
              f"operability limit", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_reproduce(args) -> int:
    cfg = _load(args.config)
    if args.table == "table1":
        rows, _ = experiments.reproduce_table1(cfg)
        title = "table1: step/tracking performance vs reference rig"
    else:
        rows, _ = experiments.reproduce_table2(cfg)
        title = "table2: long-run error accumulation vs reference rig"
    if args.axis:
        rows = [r for r in rows if r[0] == args.axis]
    print(experiments.format_report(title, rows))
    if args.table == "table1":
        rises = {r[0]: r[3] for r in rows if r[1] == "rise_time_s"}
        if len(rises) == 3:
            fastest = min(rises, key=rises.get)
            print(f"\nfastest rise: {fastest}-axis "
                  f"({', '.join(f'{a}={v:.3f}s' for a, v in sorted(rises.items()))})")
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import teleop  # lazy: pulls in the service stack

    cfg = _load(args.config)
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"--bind expects host:port, got {args.bind!r}")
    teleop.serve(cfg, host, int(port), base_ms=args.latency_base_ms,
                 jitter_ms=args.latency_jitter_ms, raw=args.raw,
                 tick_scale=args.tick_scale)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armsim",
        description="Teleoperated lead-screw robotic arm simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment, write trace + metrics")
    run_p.add_argument("--config", help="YAML config (default: packaged defaults)")
    run_p.add_argument("--experiment", required=True,
                       choices=("step", "ramp", "sine", "tri", "endurance"))
    run_p.add_argument("--axis", required=True, choices=("x", "y", "z"))
    run_p.add_argument("--amplitude", type=float, help="waveform amplitude, m")
    run_p.add_argument("--freq", type=float, help="waveform frequency, Hz")
    run_p.add_argument("--duration", type=float,
                       help="active waveform seconds (periodic runs add a settle tail)")
    run_p.add_argument("--out", required=True, help="trace CSV path")
    run_p.add_argument("--metrics", required=True, help="metrics key=value path")
    run_p.set_defaults(func=cmd_run)

    rep_p = sub.add_parser("reproduce",
                           help="re-run the reference benchmark tables")
    rep_p.add_argument("table", choices=("table1", "table2"))
    rep_p.add_argument("--config")
    rep_p.add_argument("--axis", choices=("x", "y", "z"),
                       help="limit the report to one axis")
    rep_p.set_defaults(func=cmd_reproduce)

    srv_p = sub.add_parser("serve", help="start the live teleoperation service")
    srv_p.add_argument("--bind", default="127.0.0.1:8765", help="host:port")
    srv_p.add_argument("--config")
    srv_p.add_argument("--latency-base-ms", type=float, default=0.0)
    srv_p.add_argument("--latency-jitter-ms", type=float, default=0.0)
    srv_p.add_argument("--raw", action="store_true",
                       help="newline-delimited JSON over TCP instead of websocket")
    srv_p.add_argument("--tick-scale", type=float, default=1.0,
                       help="simulation seconds per wall second")
    srv_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
