"""Script entry: render growth and comparison figures from metrics CSVs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .plots import (
    COMPARISON_METRICS,
    GROWTH_METRIC,
    PlotSpec,
    plot_comparison,
    plot_growth,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotviz", description="Render figures from kvsim metrics CSVs."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    growth = sub.add_parser("growth", help="per-turn cache size, one line per strategy")
    growth.add_argument("--csv", nargs="+", required=True,
                        help="metrics CSV file(s) (required)")
    growth.add_argument("--metric", default=GROWTH_METRIC,
                        help=f"column to plot (default: {GROWTH_METRIC})")
    growth.add_argument("--threshold-mb", type=float, default=None,
                        help="draw a dashed reference line at this MiB value (default: none)")
    growth.add_argument("--out", default="kv_growth.png",
                        help="output image path (default: kv_growth.png)")
    growth.set_defaults(func=cmd_growth)

    comparison = sub.add_parser(
        "comparison", help="percent change from baseline, grouped bars per metric"
    )
    comparison.add_argument("--csv", nargs="+", required=True,
                            help="metrics CSV file(s); must include a baseline run (required)")
    comparison.add_argument("--metric", default=",".join(COMPARISON_METRICS),
                            help="comma-separated metric columns "
                                 f"(default: {','.join(COMPARISON_METRICS)})")
    comparison.add_argument("--out", default="comparison.png",
                            help="output image path (default: comparison.png)")
    comparison.set_defaults(func=cmd_comparison)

    return parser


def cmd_growth(args) -> int:
    spec = PlotSpec(
        csv_paths=tuple(Path(p) for p in args.csv),
        out_path=Path(args.out),
        threshold_mb=args.threshold_mb,
        metrics=(args.metric,),
    )
    print(f"wrote {plot_growth(spec)}")
    return 0


def cmd_comparison(args) -> int:
    metrics = tuple(m.strip() for m in args.metric.split(",") if m.strip())
    spec = PlotSpec(
        csv_paths=tuple(Path(p) for p in args.csv),
        out_path=Path(args.out),
        metrics=metrics,
    )
    print(f"wrote {plot_comparison(spec)}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
