"""Command-line interface.

Subcommands: closure, simulate, reference, picard, rates, report.
Exit codes: 0 success / targets met, 2 rate-target failure, 1 runtime
error.  --out overrides the configured output directory; otherwise runs
land under $LOWMACH_OUT (or the working directory) plus the config's
output dir.  All numeric output is decimal with 17 significant digits.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .closure import Gammas, jet
from .config import RunConfig, load_config, validate
from .errors import ConfigError, LowmachError
from .field import format_value


def _range_spec(text):
    try:
        a, b, n = text.split(":")
        return float(a), float(b), int(n)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected start:stop:count, got {text!r}") from exc


def _gammas_spec(text):
    try:
        gp, gm = (float(tok) for tok in text.split(","))
        return Gammas(gp, gm)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected gamma_plus,gamma_minus, got {text!r}") from exc


def build_parser():
    top = argparse.ArgumentParser(
        prog="lowmach",
        description="Two-fluid low Mach number laboratory")
    sub = top.add_subparsers(dest="command", required=True)

    closure_p = sub.add_parser("closure", help="pressure-closure utilities")
    closure_sub = closure_p.add_subparsers(dest="closure_command",
                                           required=True)
    table = closure_sub.add_parser("table",
                                   help="tabulate Z, alpha, p and slopes")
    table.add_argument("--gammas", type=_gammas_spec, required=True,
                       metavar="GP,GM")
    table.add_argument("--r-range", type=_range_spec, required=True,
                       metavar="A:B:N")
    table.add_argument("--q-range", type=_range_spec, required=True,
                       metavar="A:B:N")
    table.add_argument("--out", required=True)

    def run_parser(name, help_text, **extra):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        for flag, kw in extra.items():
            p.add_argument(flag, **kw)
        return p

    run_parser("simulate", "two-fluid run with diagnostics",
               **{"--resume": dict(default=None,
                                   help="checkpoint file to continue from")})
    run_parser("reference", "incompressible limit run")
    run_parser("picard", "frozen-coefficient iteration",
               **{"--iters": dict(type=int, required=True)})
    run_parser("rates", "epsilon sweep against the rate targets",
               **{"--workers": dict(type=int, default=1)})

    rep = sub.add_parser("report", help="inspect a saved rate report")
    rep.add_argument("--report", required=True)
    return top


def resolve_out_dir(cfg: RunConfig, cli_out):
    if cli_out:
        return cli_out
    root = os.environ.get(harness.ENV_OUT_ROOT, ".")
    return os.path.join(root, cfg.out_dir)


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
        validate(cfg)
    return cfg


def cmd_closure_table(args):
    r0, r1, nr = args.r_range
    q0, q1, nq = args.q_range
    rs = np.linspace(r0, r1, nr)
    qs = np.linspace(q0, q1, nq)
    R, Q = np.meshgrid(rs, qs, indexing="ij")
    J = jet(R.ravel(), Q.ravel(), args.gammas)
    with open(args.out, "w", newline="") as fh:
        fh.write("R,Q,Z,alpha,p,dZdR,dZdQ\n")
        for i in range(R.size):
            row = (J.R[i], J.Q[i], J.Z[i], J.alpha[i], J.p[i],
                   J.dZdR[i], J.dZdQ[i])
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return 0


def print_report(report) -> int:
    for run in report.runs:
        print(f"eps={format_value(run['epsilon'])} status={run['status']} "
              f"sup_rate_R={format_value(run['sup_rate_R'])} "
              f"sup_rel_energy={format_value(run['sup_rel_energy'])}")
    for s in report.slopes:
        print(f"slope[{s.quantity}] = {format_value(s.slope)} "
              f"(target >= {format_value(s.target)}, "
              f"threshold {format_value(harness.SLOPE_THRESHOLD)}, "
              f"residual {format_value(s.residual)}) "
              f"{'PASS' if s.passed else 'FAIL'}")
    if not report.slopes:
        print("no slopes (need >= 3 complete runs)")
    print(f"verdict: {'PASS' if report.passed else 'FAIL'}"
          f"{' (partial)' if report.partial else ''}")
    return 0 if report.passed else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "closure":
            return cmd_closure_table(args)
        if args.command == "report":
            report = harness.load_report(args.report)
            return print_report(report)

        cfg = _load(args)
        out = resolve_out_dir(cfg, args.out)
        if args.command == "simulate":
            harness.run_simulate(cfg, out, resume=args.resume)
            print(f"simulate: wrote {out}")
            return 0
        if args.command == "reference":
            harness.run_reference(cfg, out)
            print(f"reference: wrote {out}")
            return 0
        if args.command == "picard":
            _, records = harness.run_picard(cfg, args.iters, out)
            for r in records:
                print(f"k={r.k} d={format_value(r.d_sup)} "
                      f"ratio={format_value(r.ratio)}")
            print(f"picard: wrote {out}")
            return 0
        if args.command == "rates":
            report = harness.run_sweep(cfg, out_dir=out,
                                       workers=args.workers)
            code = print_report(report)
            print(f"rates: wrote {out}")
            return code
        raise ConfigError(f"unhandled command {args.command}")
    except LowmachError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
