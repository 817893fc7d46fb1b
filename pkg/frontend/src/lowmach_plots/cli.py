"""Command-line interface: `plots rates` and `plots energy`."""

from __future__ import annotations

import argparse
import sys

from . import MissingQuantity
from .figures import RATE_QUANTITIES, FigureSpec, plot_energy, plot_rates


def build_parser():
    top = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from lowmach output files")
    sub = top.add_subparsers(dest="command", required=True)

    rates = sub.add_parser("rates", help="log-log convergence panels")
    rates.add_argument("--report", required=True)
    rates.add_argument("--out", required=True)
    rates.add_argument("--format", choices=("svg", "png"), default="svg")
    rates.add_argument("--quantities", default=",".join(RATE_QUANTITIES),
                       help="comma list of report quantities")

    energy = sub.add_parser("energy", help="energy-history figure")
    energy.add_argument("--run", required=True)
    energy.add_argument("--out", required=True)
    energy.add_argument("--format", choices=("svg", "png"), default="svg")
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rates":
            spec = FigureSpec(
                report_path=args.report, out_dir=args.out,
                quantities=tuple(q for q in args.quantities.split(",") if q),
                image_format=args.format)
            written = plot_rates(spec)
            for quantity, (path, text) in written.items():
                print(f"{quantity}: {path} [{text}]")
            return 0
        if args.command == "energy":
            path, curves = plot_energy(args.run, args.out, args.format)
            print(f"energy: {path} [{', '.join(curves)}]")
            return 0
        raise MissingQuantity(f"unhandled command {args.command}")
    except MissingQuantity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
