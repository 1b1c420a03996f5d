"""Command-line front end: ``gmgini <gini|expect|estimate|simulate|fit> ...``.

Numbers are printed with 12 significant digits. Exit status is 0 on success,
1 on a numeric or convergence failure and 2 on a usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .fit import FitConfig, em_fit
from .gini import bias, bias_corrected_gini, population_gini_gm, population_gini_via_ratio, sample_gini
from .mixture import load_params, read_data
from .sim import bundled_config, load_config, run_simulation, write_table
from .specfun import ConvergenceError, DomainError

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2


def fmt(x):
    """12 significant digits."""
    return f"{x:.12g}"


def _round12(obj):
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _print_json(obj):
    print(json.dumps(_round12(obj)))


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def cmd_gini(args):
    params = load_params(args.params)
    route = population_gini_via_ratio if args.route == "ratio" else population_gini_gm
    print(fmt(route(params)))


def cmd_expect(args):
    report = bias(load_params(args.params), args.n)
    _print_json(report.to_dict())


def cmd_estimate(args):
    x = read_data(args.data)
    if args.params is not None:
        fitted = load_params(args.params)
    else:
        fitted = em_fit(x, FitConfig(m=args.fit, seed=args.seed)).params
    print(f"ghat {fmt(sample_gini(x))}")
    print(f"ghat_bc {fmt(bias_corrected_gini(x, fitted))}")


def cmd_simulate(args):
    if Path(args.config).is_file():
        cfg = load_config(args.config)
    else:
        cfg = bundled_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    table = run_simulation(cfg)
    write_table(table, args.out)
    failed = sum(r.n_failed_fits for r in table.rows)
    print(f"wrote {len(table)} rows to {args.out} ({cfg.sweep} sweep, {failed} failed fits)")


def cmd_fit(args):
    res = em_fit(read_data(args.data), FitConfig(m=args.fit, seed=args.seed))
    _print_json(res.to_dict())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def build_parser():
    p = _Parser(prog="gmgini", description="Gini coefficients of gamma mixtures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gini", help="population Gini of a mixture")
    g.add_argument("--params", required=True, help="JSON file with weights, shapes, rate")
    g.add_argument("--route", choices=("gm", "ratio"), default="gm")
    g.set_defaults(func=cmd_gini)

    e = sub.add_parser("expect", help="exact E[G_hat] and bias for sample size n")
    e.add_argument("--params", required=True)
    e.add_argument("--n", type=int, required=True)
    e.set_defaults(func=cmd_expect)

    s = sub.add_parser("estimate", help="sample and bias-corrected Gini of a data file")
    s.add_argument("--data", required=True, help="one positive number per line")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--params", help="use these parameters instead of fitting")
    src.add_argument("--fit", type=int, default=2, metavar="M", help="components to fit (default 2)")
    s.add_argument("--seed", type=_u64, default=0)
    s.set_defaults(func=cmd_estimate)

    m = sub.add_parser("simulate", help="Monte Carlo study, written as CSV")
    m.add_argument("--config", required=True, help="JSON config file, or a bundled name (fig2, fig3)")
    m.add_argument("--out", required=True)
    m.add_argument("--seed", type=_u64, default=None, help="override the master seed")
    m.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="EM fit of a gamma mixture, printed as JSON")
    f.add_argument("--data", required=True)
    f.add_argument("--fit", type=int, default=2, metavar="M")
    f.add_argument("--seed", type=_u64, default=0)
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except (DomainError, ValueError, OSError) as exc:
        print(f"gmgini {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ArithmeticError, RuntimeError) as exc:
        print(f"gmgini {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
