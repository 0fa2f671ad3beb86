"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Statistical criteria run at a fixed seed chosen before looking at results
(seed 0 throughout), so every verdict is reproducible.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from loctime.excursion import (ExcursionBudget, Radii, TargetCounts, excursion_trace,
                               qn_chain_monte_carlo, qn_exact)
from loctime.experiments import ExperimentConfig, exponent_fit, rows_to_csv, sweep
from loctime.gff import domination_check, ray_knight_check
from loctime.green import (green_exact, green_log_residual, hitting_bracket,
                           hitting_prob_exact, kac_moment, laplace_excursion_transform)
from loctime.torus import PointSet, ball, torus_distance
from loctime.walker import (CoverTime, FixedTime, HitSet, InverseLocalTime, WalkConfig,
                            run_until, tau_concentration_check)

SEED = 0


# seconds spent in shared fixtures, charged to every criterion that uses them
FIXTURE_SECONDS = {}


def report(num, name, ok, detail, started, shared=()):
    spent = time.perf_counter() - started + sum(FIXTURE_SECONDS.get(k, 0.0) for k in shared)
    line = f"C{num:02d} {'PASS' if ok else 'FAIL'}  {name}: {detail} [{spent:.1f}s]"
    ACCEPTANCE_LINES[num] = line
    print(line)
    assert ok, line


# shared Monte Carlo sample for the Kac and Laplace criteria
N_KAC, CENTER, X0, R_KAC = 16, (8, 8), (10, 8), 4.0
KAC_RUNS = 100_000


@pytest.fixture(scope="module")
def exit_local_times():
    t0 = time.perf_counter()
    disc = ball(N_KAC, CENTER, R_KAC)
    stop = HitSet(disc.complement())
    c = CENTER[0] * N_KAC + CENTER[1]
    out = np.empty(KAC_RUNS)
    for r in range(KAC_RUNS):
        lt = run_until(WalkConfig(N=N_KAC, start=X0, seed=SEED, replica=r), stop)
        out[r] = lt.occupation.ravel()[c]
    FIXTURE_SECONDS["kac"] = time.perf_counter() - t0
    return out


def test_c01_conservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    runs = 0
    for r in range(1000):
        N = int(rng.choice([8, 16, 32]))
        kind = r % 4
        cfg = WalkConfig(N=N, start=(int(rng.integers(N)), int(rng.integers(N))), seed=SEED, replica=r)
        if kind == 0:
            stop = FixedTime(float(rng.uniform(1, 5000)))
        elif kind == 1:
            target = PointSet(N, rng.choice(N * N, size=3, replace=False))
            stop = HitSet(target)
        elif kind == 2:
            stop = CoverTime()
        else:
            stop = InverseLocalTime((int(rng.integers(N)), int(rng.integers(N))), float(rng.uniform(0.5, 20)))
        lt = run_until(cfg, stop)
        total = math.fsum(lt.occupation.ravel())
        worst = max(worst, abs(total - lt.elapsed) / max(lt.elapsed, 1e-300))
        runs += 1
        if kind == 0:
            assert lt.elapsed == stop.horizon
    ok = worst <= 1e-9 and time.perf_counter() - t0 < 60
    report(1, "conservation", ok, f"{runs} runs, max relative error {worst:.2e} (limit 1e-9)", t0)


def test_c02_kac_moments(exit_local_times):
    t0 = time.perf_counter()
    assert torus_distance(N_KAC, X0, CENTER) == 2
    L = exit_local_times
    parts = []
    ok = True
    for k in (1, 2, 3):
        exact = kac_moment(N_KAC, CENTER, R_KAC, X0, k)
        v = L ** k
        mean, se = v.mean(), v.std(ddof=1) / math.sqrt(v.size)
        z = (mean - exact) / se
        ok &= abs(z) <= 3
        parts.append(f"k={k} mc={mean:.4f} exact={exact:.4f} z={z:+.2f}")
    report(2, "Kac moments", ok, "; ".join(parts), t0, ("kac",))


def test_c03_laplace_transform(exit_local_times):
    t0 = time.perf_counter()
    L = exit_local_times
    gcc = green_exact(N_KAC, ball(N_KAC, CENTER, R_KAC), CENTER, CENTER)
    parts = []
    ok = True
    for beta in (0.5, 1.0, 2.0):
        exact = laplace_excursion_transform(N_KAC, CENTER, R_KAC, X0, beta)
        v = np.exp(-beta * L / gcc)
        mean, se = v.mean(), v.std(ddof=1) / math.sqrt(v.size)
        z = (mean - exact) / se
        ok &= abs(z) <= 3
        parts.append(f"beta={beta} mc={mean:.5f} exact={exact:.5f} z={z:+.2f}")
    report(3, "Laplace transform", ok, "; ".join(parts), t0, ("kac",))


def test_c04_green_log_asymptotics():
    t0 = time.perf_counter()
    tab = green_log_residual(128, [4, 8, 16, 32])
    res = ", ".join(f"R={r.R}: {r.residual:.4f}" for r in tab.rows)
    ok = tab.max_residual <= 2.0 and tab.max_step <= 0.3 and time.perf_counter() - t0 < 120
    report(4, "Green log residual", ok,
           f"{res}; max {tab.max_residual:.4f} (<= 2.0), step {tab.max_step:.4f} (<= 0.3)", t0)


def test_c05_hitting_bracket():
    t0 = time.perf_counter()
    N, c = 256, (128, 128)
    checked, bad = 0, []
    for r in (4, 8):
        for R in (32, 64):
            for s in (0.25, 0.5, 0.75):
                d = int(round(r ** (1 - s) * R ** s))
                x0 = (c[0] + d, c[1])
                p = hitting_prob_exact(N, c, r, R, x0)
                lo, hi = hitting_bracket(r, R, d)
                checked += 1
                if not lo <= p <= hi:
                    bad.append((r, R, d, p, lo, hi))
    report(5, "hitting-probability bracket", not bad,
           f"{checked} geometries inside c1=c2=2 bracket" if not bad else f"outside: {bad}", t0)


def test_c06_excursion_durations():
    t0 = time.perf_counter()
    N, r, R, M = 64, 4, 16, 1000
    radii = Radii((float(R), float(r))).bind(N)
    rec = excursion_trace(WalkConfig(N=N, start=(0, 0), seed=SEED), (N // 2, N // 2), radii,
                          ExcursionBudget(M))
    d = rec.durations
    theory = 2 / math.pi * N * N * math.log(R / r)
    se = d.std(ddof=1) / math.sqrt(d.size)
    z = (d.mean() - theory) / se
    ok = d.size == M and abs(z) <= 3
    report(6, "excursion durations", ok,
           f"M={d.size} total={d.sum():.0f} vs {M * theory:.0f}; mean {d.mean():.1f} vs {theory:.1f}, z={z:+.2f}", t0)


def test_c07_tau_concentration():
    t0 = time.perf_counter()
    rep = tau_concentration_check(16, 50.0, 100, seed=SEED)
    ok = abs(rep.mean_z) <= 3 and rep.band <= 5.0
    report(7, "inverse local time concentration", ok,
           f"mean {rep.mean:.0f} vs tN^2={50 * 256}, z={rep.mean_z:+.2f}; q95 constant {rep.band:.3f} (<= 5)", t0)


def test_c08_ray_knight_first_moment():
    t0 = time.perf_counter()
    rep = ray_knight_check(8, 20.0, 2000, seed=SEED)
    ok = rep.max_abs_local_z <= 3 and rep.ks_average_p > 1e-3
    report(8, "Ray-Knight first moment", ok,
           f"max |z| over sites {rep.max_abs_local_z:.2f} (<= 3); spatial-average KS p={rep.ks_average_p:.3f}", t0)


def test_c09_domination():
    t0 = time.perf_counter()
    rep = domination_check(8, 20.0, 5000, (0.1, 0.3, 0.5, 0.7, 0.9), seed=SEED)
    worst = max((r.p_local - r.p_gff) / r.se for r in rep.rows if r.se > 0)
    report(9, "stochastic domination", rep.passed,
           f"{len(rep.rows)} comparisons, {rep.violations} violations; worst excess {worst:+.2f} SE", t0)


def test_c10_qn_oracle():
    t0 = time.perf_counter()
    parts = []
    ok = True
    a = qn_exact(2, TargetCounts(np.array([1, 1])), window=0, m0=1)
    b = qn_exact(2, TargetCounts(np.array([2, 2])), window=1, m0=2)
    ok &= math.isclose(a, 0.25, rel_tol=1e-12) and math.isclose(b, 0.5625, rel_tol=1e-12)
    parts.append(f"hand cases {a:.12g}, {b:.12g}")
    for targets, w in (([3, 3, 3], 1), ([4, 4, 4], 2), ([6, 5, 4], 1), ([2, 2, 2], 3)):
        tc = TargetCounts(np.array(targets))
        exact = qn_exact(3, tc, window=w)
        mc, se = qn_chain_monte_carlo(3, tc, 1_000_000, seed=SEED, window=w)
        z = (mc - exact) / se
        ok &= abs(z) <= 3
        parts.append(f"{targets}/w={w}: {exact:.5f} vs {mc:.5f} z={z:+.2f}")
    report(10, "q_n oracle", ok, "; ".join(parts), t0)


CENSUS_CFG = ExperimentConfig(N_list=(32, 64, 128), theta=1.0, eta_list=(0.5,), replicas=10,
                              seed=SEED, suites=("census",))
THICK_ZERO_CFG = ExperimentConfig(N_list=(64,), theta=1.0, eta_list=(1.6,), replicas=20,
                                  seed=SEED, suites=("census",))
LATE_CFG = ExperimentConfig(N_list=(32, 64, 128), eta_list=(0.5,), replicas=10, seed=SEED,
                            suites=("late",))
LATE_ZERO_CFG = ExperimentConfig(N_list=(64,), eta_list=(1.5,), replicas=20, seed=SEED,
                                 suites=("late",))
MIN_CFG = ExperimentConfig(N_list=(64,), theta=0.5, replicas=20, seed=SEED, suites=("extremes",))
MAX_CFG = ExperimentConfig(N_list=(64,), theta=1.0, replicas=20, seed=SEED, suites=("extremes",))
SWEEPS = {"census": CENSUS_CFG, "thick-zero": THICK_ZERO_CFG, "late": LATE_CFG,
          "late-zero": LATE_ZERO_CFG, "min": MIN_CFG, "max": MAX_CFG}


@pytest.fixture(scope="module")
def sweep_rows():
    out = {}
    for name, cfg in SWEEPS.items():
        t0 = time.perf_counter()
        out[name] = sweep(cfg)[0]
        FIXTURE_SECONDS[name] = time.perf_counter() - t0
    return out


def _zero_fraction(rows):
    return sum(r["count"] == 0 for r in rows) / len(rows)


def test_c11_thick_exponent(sweep_rows):
    t0 = time.perf_counter()
    fit = exponent_fit([(r["N"], r["count"]) for r in sweep_rows["census"]])
    frac = _zero_fraction(sweep_rows["thick-zero"])
    ok_slope = abs(fit.slope - 1.657) <= 0.5
    ok_zero = frac >= 0.9
    report(11, "thick-point exponent", ok_slope and ok_zero,
           f"slope {fit.slope:.3f} +/- {fit.stderr:.3f} (band 1.657 +/- 0.5, "
           f"{fit.dropped_zeros} zeros dropped) {'ok' if ok_slope else 'out'}; "
           f"zero count at eta=1.6 in {frac:.0%} of 20 (needs >= 90%) {'ok' if ok_zero else 'short'}", t0,
           ("census", "thick-zero"))


def test_c12_late_exponent(sweep_rows):
    t0 = time.perf_counter()
    fit = exponent_fit([(r["N"], r["count"]) for r in sweep_rows["late"]])
    frac = _zero_fraction(sweep_rows["late-zero"])
    ok = abs(fit.slope - 1.0) <= 0.35 and frac >= 0.9
    report(12, "late-point exponent", ok,
           f"slope {fit.slope:.3f} +/- {fit.stderr:.3f} (band 1.0 +/- 0.35); "
           f"zero count at eta=1.5 in {frac:.0%} of 20", t0, ("late", "late-zero"))


def test_c13_extremes(sweep_rows):
    t0 = time.perf_counter()
    frac = sum(r["min_local_time"] == 0 for r in sweep_rows["min"]) / len(sweep_rows["min"])
    med = float(np.median([r["max_norm"] for r in sweep_rows["max"]]))
    ok = frac >= 0.9 and 0.9 < med < 2.1
    report(13, "normalised extremes", ok,
           f"min local time 0 in {frac:.0%} at theta=0.5; median max_norm {med:.3f} in (0.9, 2.1) at theta=1", t0,
           ("min", "max"))


def test_c14_determinism(sweep_rows):
    t0 = time.perf_counter()
    same = []
    for name, cfg in SWEEPS.items():
        again = rows_to_csv(sweep(cfg)[0]).encode()
        same.append(again == rows_to_csv(sweep_rows[name]).encode())
    report(14, "determinism", all(same),
           f"{sum(same)}/{len(same)} acceptance sweeps byte-identical on rerun", t0)
