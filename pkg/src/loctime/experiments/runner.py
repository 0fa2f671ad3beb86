"""Seeded sweeps over (suite, N, replica) cells.

Cells are independent jobs; with more than one worker they run in a process
pool and results are merged back in cell order, so output does not depend on
the worker count.
"""
from __future__ import annotations

import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from ..excursion import EtaOutOfRange, LabRadii, MultiscaleConfig, multiscale_radii, target_counts
from ..gff import MAX_SIDE, domination_check, ray_knight_check
from ..green import green_log_residual
from ..walker import inverse_local_time, t_theta
from .census import (THICK, InsufficientData, exponent_fit, extremes_of, late_exponent,
                     late_point_counts, successful_counts, thick_exponent, thick_thin_count,
                     thin_exponent)
from .config import ConfigParse, ExperimentConfig, load_config
from .io import IoFailure, rows_to_csv, summary_to_json, version_string, write_text

ROW_SUITES = ("census", "late", "extremes", "excursions")
CHECK_SUITES = ("gff-check", "green-check")


class InvariantViolation(RuntimeError):
    pass


def cell_seed(seed: int, N: int) -> int:
    """Seed for every run at side N; distinct sides draw unrelated streams."""
    return int(np.random.SeedSequence([seed, N]).generate_state(1, dtype=np.uint32)[0])


def _census_rows(cfg, N, r, seed):
    t = t_theta(N, cfg.theta)
    lt = inverse_local_time(N, t, seed, r)
    rows = []
    for eta in cfg.eta_list:
        for sign in cfg.signs:
            rows.append(dict(suite="census", N=N, theta=cfg.theta, eta=eta, sign=sign,
                             replica=r, seed=seed, count=thick_thin_count(lt, t, eta, sign),
                             tau_value=lt.elapsed))
    return rows


def _late_rows(cfg, N, r, seed):
    counts, cover = late_point_counts(N, cfg.eta_list, seed, r)
    return [dict(suite="late", N=N, eta=eta, replica=r, seed=seed, count=c, tau_value=cover)
            for eta, c in zip(cfg.eta_list, counts)]


def _extremes_rows(cfg, N, r, seed):
    t = t_theta(N, cfg.theta)
    ex = extremes_of(inverse_local_time(N, t, seed, r), t)
    return [dict(suite="extremes", N=N, theta=cfg.theta, replica=r, seed=seed,
                 tau_value=ex.tau_value, max_norm=ex.max_norm, min_norm=ex.min_norm,
                 min_local_time=ex.min_local_time)]


def _multiscale(cfg):
    return MultiscaleConfig(n=cfg.depth, mode=LabRadii(cfg.R0, cfg.rho))


def _excursion_rows(cfg, N, r, seed):
    targets = [target_counts(cfg.depth, cfg.theta, eta) for eta in cfg.eta_list]
    counts, tau = successful_counts(N, _multiscale(cfg), targets, seed, r)
    return [dict(suite="excursions", N=N, theta=cfg.theta, eta=eta, sign=THICK, replica=r,
                 seed=seed, count=c, tau_value=tau) for eta, c in zip(cfg.eta_list, counts)]


_ROW_JOBS = {"census": _census_rows, "late": _late_rows, "extremes": _extremes_rows,
             "excursions": _excursion_rows}


def _gff_check(cfg, N, seed):
    rk = ray_knight_check(N, cfg.t, cfg.replicas, seed)
    dom = domination_check(N, cfg.t, cfg.replicas, cfg.quantiles, seed)
    return {
        "N": N, "t": cfg.t, "replicas": cfg.replicas,
        "ray_knight": {"max_abs_local_mean_z": rk.max_abs_local_z,
                       "max_abs_left_mean_z": rk.max_abs_left_z,
                       "max_abs_second_moment_z": rk.max_abs_second_z,
                       "ks_average_p": rk.ks_average_p, "ks_max_p": rk.ks_max_p,
                       "passed": rk.passed},
        "domination": {"violations": dom.violations, "comparisons": len(dom.rows),
                       "passed": dom.passed},
    }


def _green_check(cfg, N, seed):
    radii = [R for R in cfg.radii if R < N / 2]
    if not radii:
        return {"N": N, "skipped": "no radius below N/2"}
    tab = green_log_residual(N, radii)
    return {"N": N, "R": radii, "residuals": [row.residual for row in tab.rows],
            "max_residual": tab.max_residual, "max_step": tab.max_step,
            "off_constant": tab.off_constant, "passed": tab.passed}


_CHECK_JOBS = {"gff-check": _gff_check, "green-check": _green_check}


def _run_cell(cell):
    cfg, suite, N, r = cell
    seed = cell_seed(cfg.seed, N)
    if suite in _ROW_JOBS:
        rows = _ROW_JOBS[suite](cfg, N, r, seed)
        for row in rows:
            c = row.get("count")
            if c is not None and not 0 <= c <= N * N:
                raise InvariantViolation(f"count {c} outside [0, N^2] at N={N}")
            if not math.isfinite(row["tau_value"]):
                raise InvariantViolation(f"non-finite run length at N={N}")
        return rows
    return _CHECK_JOBS[suite](cfg, N, seed)


def _cells(cfg: ExperimentConfig):
    for suite in cfg.suites:
        for N in cfg.N_list:
            if suite in ROW_SUITES:
                for r in range(cfg.replicas):
                    yield (cfg, suite, N, r)
            else:
                yield (cfg, suite, N, 0)


def _validate(cfg: ExperimentConfig) -> None:
    if "excursions" in cfg.suites:
        try:
            for eta in cfg.eta_list:
                target_counts(cfg.depth, cfg.theta, eta)
            for N in cfg.N_list:
                multiscale_radii(_multiscale(cfg)).bind(N)
        except EtaOutOfRange as exc:
            raise ConfigParse("eta_list", str(exc)) from None
        except ValueError as exc:
            raise ConfigParse("R0", str(exc)) from None
    if "gff-check" in cfg.suites:
        if max(cfg.N_list) > MAX_SIDE:
            raise ConfigParse("N_list", f"gff-check needs N <= {MAX_SIDE}")
        if cfg.replicas < 2:
            raise ConfigParse("replicas", "gff-check needs at least 2 replicas")


def _fit_entry(records, predicted):
    entry = {"predicted_slope": predicted}
    try:
        fit = exponent_fit([(r["N"], r["count"]) for r in records])
    except InsufficientData as exc:
        entry.update(slope=None, error=str(exc),
                     dropped_zeros=sum(r["count"] == 0 for r in records))
        return entry
    entry.update(slope=fit.slope, intercept=fit.intercept, stderr=fit.stderr,
                 points=fit.points, dropped_zeros=fit.dropped_zeros)
    return entry


def _fits(cfg, rows):
    out = {}
    census = [r for r in rows if r["suite"] == "census"]
    for eta in cfg.eta_list:
        for sign in cfg.signs:
            sel = [r for r in census if r["eta"] == eta and r["sign"] == sign]
            if sel:
                pred = (thick_exponent if sign == THICK else thin_exponent)(cfg.theta, eta)
                out[f"census/{sign}/theta={cfg.theta!r}/eta={eta!r}"] = _fit_entry(sel, pred)
    late = [r for r in rows if r["suite"] == "late"]
    for eta in cfg.eta_list:
        sel = [r for r in late if r["eta"] == eta]
        if sel:
            out[f"late/eta={eta!r}"] = _fit_entry(sel, late_exponent(eta))
    ext = [r for r in rows if r["suite"] == "extremes"]
    for N in cfg.N_list:
        sel = [r for r in ext if r["N"] == N]
        if sel:
            out[f"extremes/N={N}"] = {
                "median_max_norm": statistics.median(r["max_norm"] for r in sel),
                "median_min_norm": statistics.median(r["min_norm"] for r in sel),
                "fraction_min_local_time_zero": sum(r["min_local_time"] == 0 for r in sel) / len(sel),
                "predicted_max_norm": 1 + 1 / (2 * math.sqrt(cfg.theta)),
                "predicted_min_norm": 1 - 1 / (2 * math.sqrt(cfg.theta)),
            }
    return out


def sweep(cfg: ExperimentConfig, workers: Optional[int] = None):
    """Run every cell of ``cfg``; returns (rows, summary)."""
    _validate(cfg)
    cells = list(_cells(cfg))
    w = cfg.workers if workers is None else workers
    if w > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=w) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    rows, checks = [], {}
    for cell, res in zip(cells, results):
        if cell[1] in ROW_SUITES:
            rows.extend(res)
        else:
            checks.setdefault(cell[1], []).append(res)
    summary = {
        "version": version_string(),
        "config": cfg.echo(),
        "seeds": {str(N): cell_seed(cfg.seed, N) for N in cfg.N_list},
        "rows": len(rows),
        "fits": _fits(cfg, rows),
        "checks": checks,
    }
    return rows, summary


def output_paths(output_path: str) -> tuple[Path, Path]:
    base = Path(output_path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    return base.with_name(base.name + ".csv"), base.with_name(base.name + ".json")


def run_experiment(config_path, workers: Optional[int] = None) -> int:
    """Run a config file; writes ``<output_path>.csv`` and ``<output_path>.json``.

    Returns 0 on success, 2 for config errors, 3 for I/O failures and 1 for
    a hard invariant violation.
    """
    try:
        cfg = load_config(config_path)
        rows, summary = sweep(cfg, workers)
    except ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 1
    csv_path, json_path = output_paths(cfg.output_path)
    try:
        write_text(csv_path, rows_to_csv(rows))
        write_text(json_path, summary_to_json(summary))
    except IoFailure as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 3
    return 0
