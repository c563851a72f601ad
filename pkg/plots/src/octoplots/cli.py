"""octoplots: render figures from simulator CSV outputs.

octoplots timeseries QUEUE_CSV [QUEUE_CSV ...] -o OUT.png
octoplots scatter    SUMMARY_CSV              -o OUT.png
octoplots bars       SUMMARY_CSV              -o OUT.png

Exit status: 0 success, 1 schema or input error.
"""

from __future__ import annotations

import argparse
import sys

from octoplots.figures import render_bars, render_scatter, render_timeseries
from octoplots.schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="octoplots")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("timeseries", help="queuing delay over time")
    p.add_argument("queue_csvs", nargs="+")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--band-ms", type=float, default=30.0,
                   help="reference band height (0 disables)")

    p = sub.add_parser("scatter", help="p99 latency vs quality per scheme")
    p.add_argument("summary_csv")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("bars", help="age-of-information bars")
    p.add_argument("summary_csv")
    p.add_argument("-o", "--out", required=True)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "timeseries":
            render_timeseries(args.queue_csvs, args.out, band_ms=args.band_ms)
        elif args.command == "scatter":
            render_scatter(args.summary_csv, args.out)
        else:
            render_bars(args.summary_csv, args.out)
    except (SchemaError, OSError) as e:
        print(f"octoplots: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
