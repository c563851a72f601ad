"""Command-line entry points.

octosim run      run one scenario (optionally forced to a named scheme)
octosim compare  run one scenario under several schemes, shared seed
octosim sweep    buffer-size and RTT sensitivity sweep

Exit status: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys

from octosim.config import (
    ConfigError,
    FlowConfig,
    LinkConfig,
    SCHEMES,
    ScenarioConfig,
    load_scenario,
)
from octosim.metrics import write_summary_csv
from octosim.sim import run_scenario

SWEEP_BUFFERS = (94_000, 375_000, 1_500_000)
SWEEP_RTTS_MS = (20, 60, 120)


def _default_scenario() -> ScenarioConfig:
    return ScenarioConfig(
        name="default",
        link=LinkConfig(trace="synth:cellular"),
        flows=[FlowConfig(sender="spatial")],
        duration_s=30.0,
    )


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario) if args.scenario else _default_scenario()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trace is not None:
        cfg.link.trace = args.trace
    if args.duration is not None:
        cfg.duration_s = args.duration
    if args.out is not None:
        cfg.out_dir = args.out
    if args.event_log:
        cfg.event_log = True
    cfg.validate()
    return cfg


def _print_rows(rows) -> None:
    for row in rows:
        q = row["quality_mean"]
        p99 = row["lat_p99_ms"]
        print(
            f"{row['scenario']:<28} {row['scheme']:<12} "
            f"quality={'-' if q is None else f'{q:.4f}'} "
            f"lat_p99_ms={'-' if p99 is None else f'{p99:.1f}'} "
            f"drops(msg/bitrate/tail)={row['drops_by_msg']}/"
            f"{row['drops_by_bitrate']}/{row['drops_tail']}"
        )


def cmd_run(args) -> int:
    cfg = _load(args)
    res = run_scenario(cfg, scheme=args.scheme)
    res.write_outputs(cfg.out_dir)
    _print_rows(res.summary_rows())
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    schemes = args.schemes.split(",") if args.schemes else list(SCHEMES)
    rows = []
    for scheme in schemes:
        res = run_scenario(copy.deepcopy(cfg), scheme=scheme)
        res.write_outputs(os.path.join(cfg.out_dir, scheme))
        rows.extend(res.summary_rows())
    write_summary_csv(os.path.join(cfg.out_dir, "summary.csv"), rows)
    _print_rows(rows)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    rows = []

    def one(name: str, scheme: str, buffer_bytes: int, rtt_ms: int):
        c = copy.deepcopy(cfg)
        c.name = name
        c.link.buffer_bytes = buffer_bytes
        c.link.rtt_ms = rtt_ms
        res = run_scenario(c, scheme=scheme)
        res.write_outputs(os.path.join(cfg.out_dir, name.replace("/", "_")))
        rows.extend(res.summary_rows())

    for buf in SWEEP_BUFFERS:
        kb = buf // 1000
        one(f"{cfg.name}/buf{kb}k", "pdrop", buf, cfg.link.rtt_ms)
        one(f"{cfg.name}/buf{kb}k", "octopus", buf, cfg.link.rtt_ms)
    for rtt in SWEEP_RTTS_MS:
        one(f"{cfg.name}/rtt{rtt}ms", "octopus", cfg.link.buffer_bytes, rtt)
    write_summary_csv(os.path.join(cfg.out_dir, "summary.csv"), rows)
    _print_rows(rows)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario JSON file (default: built-in)")
    p.add_argument("--out", help="output directory (overrides scenario)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--trace", help="trace spec: constant:<mbps>, "
                                   "synth:cellular[:seed[:ms]], or a file path")
    p.add_argument("--duration", type=float, help="run length in seconds")
    p.add_argument("--event-log", action="store_true",
                   help="also write the raw per-packet event log")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="octosim")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    _add_common(p)
    p.add_argument("--scheme", choices=SCHEMES,
                   help="force a named scheme instead of the scenario settings")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare", help="run one scenario under several schemes")
    _add_common(p)
    p.add_argument("--schemes", help="comma-separated subset (default: all)")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("sweep", help="buffer and RTT sensitivity sweep")
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"octosim: config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - report and exit nonzero
        print(f"octosim: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
