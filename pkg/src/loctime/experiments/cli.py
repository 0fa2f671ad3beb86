"""Command-line front end: ``loctime <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import sys
from collections import OrderedDict

from .census import InsufficientData, exponent_fit
from .config import ConfigParse, ExperimentConfig
from .io import IoFailure, csv_to_rows, emit, rows_to_csv, summary_to_json
from .runner import InvariantViolation, run_experiment, sweep

# flag names reported in diagnostics, keyed by config field
_FLAG = {"N_list": "--n", "eta_list": "--eta", "theta": "--theta", "replicas": "--replicas",
         "seed": "--seed", "workers": "--workers", "sign": "--sign", "depth": "--depth",
         "R0": "--R0", "rho": "--rho", "t": "--t", "radii": "--radii",
         "quantiles": "--quantiles"}


def _floats(text):
    try:
        return tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p, n_default, fmt_default="csv", eta=True, theta=True):
    p.add_argument("--n", type=_ints, default=n_default, help="torus side(s), comma-separated")
    if theta:
        p.add_argument("--theta", type=float, default=1.0)
    if eta:
        p.add_argument("--eta", type=_floats, default=(0.5,), help="eta value(s), comma-separated")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=fmt_default)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loctime",
                                 description="Local times of random walk on the 2D torus.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("census", help="thick/thin point counts at tau_{t_theta}")
    _common(p, (64,))
    p.add_argument("--sign", choices=("thick", "thin", "both"), default="thick")

    p = sub.add_parser("late", help="late-point counts from cover runs")
    _common(p, (64,), theta=False)

    p = sub.add_parser("extremes", help="normalised max/min of the local-time field")
    _common(p, (64,), eta=False)

    p = sub.add_parser("excursions", help="successful-center census on nested annuli")
    _common(p, (128,))
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--R0", type=float, default=16.0)
    p.add_argument("--rho", type=float, default=2.0)

    p = sub.add_parser("gff-check", help="Ray-Knight and domination functionals")
    _common(p, (8,), fmt_default="json", eta=False, theta=False)
    p.add_argument("--t", type=float, default=20.0)
    p.add_argument("--quantiles", type=_floats, default=(0.1, 0.3, 0.5, 0.7, 0.9))

    p = sub.add_parser("green-check", help="Green's function log-asymptotics residuals")
    _common(p, (128,), fmt_default="json", eta=False, theta=False)
    p.add_argument("--radii", type=_floats, default=(4.0, 8.0, 16.0, 32.0))

    p = sub.add_parser("exponents", help="fit log-log slopes to census rows in a CSV file")
    p.add_argument("input", help="CSV written by census/late/excursions ('-' for stdin)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("run", help="run a key = value config file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    return ap


def _config_from_args(args) -> ExperimentConfig:
    kw = dict(N_list=args.n, replicas=args.replicas, seed=args.seed, workers=args.workers,
              suites=(args.command,))
    for name in ("theta", "sign", "depth", "R0", "rho", "t", "radii", "quantiles"):
        if hasattr(args, name):
            kw[name] = getattr(args, name)
    if hasattr(args, "eta"):
        kw["eta_list"] = args.eta
    return ExperimentConfig(**kw)


def _exponents(args) -> int:
    text = sys.stdin.read() if args.input == "-" else open(args.input, encoding="utf-8").read()
    rows = csv_to_rows(text)
    groups = OrderedDict()
    for r in rows:
        if r["count"] is None:
            continue
        groups.setdefault((r["suite"], r["theta"], r["eta"], r["sign"]), []).append(r)
    fits = OrderedDict()
    for (suite, theta, eta, sign), sel in groups.items():
        parts = [suite, sign, None if theta is None else f"theta={theta!r}",
                 None if eta is None else f"eta={eta!r}"]
        key = "/".join(p for p in parts if p is not None)
        try:
            f = exponent_fit([(r["N"], r["count"]) for r in sel])
            fits[key] = {"slope": f.slope, "intercept": f.intercept, "stderr": f.stderr,
                         "points": f.points, "dropped_zeros": f.dropped_zeros}
        except InsufficientData as exc:
            fits[key] = {"slope": None, "error": str(exc)}
    emit(summary_to_json({"fits": fits}), args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.config, workers=args.workers)
        if args.command == "exponents":
            return _exponents(args)
        cfg = _config_from_args(args)
        rows, summary = sweep(cfg)
        if args.format == "csv":
            emit(rows_to_csv(rows), args.out)
        else:
            summary["data"] = rows
            emit(summary_to_json(summary), args.out)
        return 0
    except ConfigParse as exc:
        key = _FLAG.get(exc.key, exc.key)
        msg = str(exc).split(": ", 1)[-1] if exc.key else str(exc)
        print(f"error: {key}: {msg}" if key else f"error: {msg}", file=sys.stderr)
        return 2
    except (IoFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
