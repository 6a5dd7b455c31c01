"""Command-line figure rendering: `plots learning-curves`, `plots regret`."""

from __future__ import annotations

import argparse
import sys

from .figures import SchemaError, plot_learning_curves, plot_regret


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render experiment figures from harness CSVs."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_curves = sub.add_parser("learning-curves", help="mean/std learning curves")
    p_curves.add_argument("csv", help="fig1_input.csv from the experiment report")
    p_curves.add_argument("-o", "--out", required=True, help="output PNG path")

    p_regret = sub.add_parser("regret", help="mean/std pseudo-regret deltas")
    p_regret.add_argument("csv", help="fig2_input.csv from the experiment report")
    p_regret.add_argument("-o", "--out", required=True, help="output PNG path")

    args = parser.parse_args(argv)
    try:
        if args.command == "learning-curves":
            out = plot_learning_curves(args.csv, args.out)
        else:
            out = plot_regret(args.csv, args.out)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
