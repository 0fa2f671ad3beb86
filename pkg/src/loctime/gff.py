"""Gaussian free field on Z_N^2 pinned at the origin, and its couplings
with the local-time field at inverse local times.

The field has covariance C(x, y) = E_x[L_{T_0}(y)], the Green's function of
the walk killed at the origin.  All comparisons with local times are made
through fixed batteries of functionals (means, second moments, the spatial
average, the maximum, marginal tails), which are necessary but not
sufficient for the equalities and dominations in law being probed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la
from scipy import stats

from . import rng as rngmod
from .green import green_matrix
from .torus import ORIGIN, PointSet, as_point
from .walker import inverse_local_time

MAX_SIDE = 64


class SizeTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class GffCovariance:
    """Dense covariance over all N^2 sites (row/column ``i * N + j``).

    ``factor`` is the lower Cholesky factor of the covariance restricted to
    the sites other than the origin.
    """

    N: int
    C: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)

    def __call__(self, x, y) -> float:
        a = as_point(self.N, x).index(self.N)
        b = as_point(self.N, y).index(self.N)
        return float(self.C[a, b])

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.C).reshape(self.N, self.N)

    def factor_residual(self) -> float:
        inner = self.C[1:, 1:]
        return float(np.max(np.abs(self.factor @ self.factor.T - inner)))


_COV_CACHE: dict[int, GffCovariance] = {}


def gff_covariance(N: int) -> GffCovariance:
    if N < 2:
        raise ValueError("N must be at least 2")
    if N > MAX_SIDE:
        raise SizeTooLarge(f"dense factorisation is capped at N={MAX_SIDE}")
    cov = _COV_CACHE.get(N)
    if cov is not None:
        return cov
    rest = PointSet(N, np.arange(1, N * N))
    G = green_matrix(N, rest).values
    C = np.zeros((N * N, N * N))
    C[1:, 1:] = G
    L = la.cholesky(G, lower=True)
    C.setflags(write=False)
    L.setflags(write=False)
    cov = GffCovariance(N=N, C=C, factor=L)
    _COV_CACHE[N] = cov
    return cov


@dataclass(frozen=True)
class GffSample:
    N: int
    h: np.ndarray

    def __getitem__(self, x) -> float:
        p = as_point(self.N, x)
        return float(self.h[p.i, p.j])


def gff_samples(cov: GffCovariance, count: int, seed: int, replica: int = 0) -> np.ndarray:
    """``count`` independent fields, shape (count, N, N)."""
    gen = rngmod.replica_rng(seed, replica, rngmod.GFF)
    z = gen.standard_normal((cov.N * cov.N - 1, count))
    out = np.zeros((count, cov.N * cov.N))
    out[:, 1:] = (cov.factor @ z).T
    return out.reshape(count, cov.N, cov.N)


def gff_sample(cov: GffCovariance, seed: int, replica: int = 0) -> GffSample:
    return GffSample(cov.N, gff_samples(cov, 1, seed, replica)[0])


def level_threshold(N: int, eta: float) -> float:
    return eta * 2 * math.sqrt(2 / math.pi) * math.log(N)


def gff_level_census(sample, eta: float) -> int:
    """Number of sites with h(x) >= eta * 2 sqrt(2/pi) log N."""
    h = sample.h if isinstance(sample, GffSample) else np.asarray(sample)
    N = h.shape[-1]
    return int(np.count_nonzero(h >= level_threshold(N, eta)))


def local_time_fields(N: int, t: float, replicas: int, seed: int, backend=None) -> np.ndarray:
    """L_{tau_t}(x) for ``replicas`` independent walks, shape (R, N, N)."""
    return np.stack([inverse_local_time(N, t, seed, r, backend=backend).occupation
                     for r in range(replicas)])


def _z(mean_diff, se):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, mean_diff / se, np.where(mean_diff == 0, 0.0, np.inf))


@dataclass
class RayKnightReport:
    N: int
    t: float
    replicas: int
    local_mean_z: np.ndarray = field(repr=False)
    left_mean_z: np.ndarray = field(repr=False)
    second_moment_z: np.ndarray = field(repr=False)
    ks_average_p: float = float("nan")
    ks_max_p: float = float("nan")
    max_abs_local_z: float = float("nan")
    max_abs_left_z: float = float("nan")
    max_abs_second_z: float = float("nan")
    passed: bool = False


def ray_knight_check(N: int, t: float, replicas: int, seed: int = 0,
                     z_limit: float = 3.0, p_min: float = 1e-3, backend=None) -> RayKnightReport:
    """Compare L_{tau_t} + h^2/2 with (h' + sqrt(2t))^2/2, sampled independently.

    Per-site z-scores are reported for E[L_{tau_t}(x)] = t, for the mean of
    the left side against t + C(x,x)/2, and for the second moments of the
    two sides; two-sample KS tests compare the spatial averages and maxima.
    """
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    cov = gff_covariance(N)
    L = local_time_fields(N, t, replicas, seed, backend)
    h_left = gff_samples(cov, replicas, seed, replica=1)
    h_right = gff_samples(cov, replicas, seed, replica=2)
    left = L + 0.5 * h_left ** 2
    right = 0.5 * (h_right + math.sqrt(2 * t)) ** 2
    se = lambda a: a.std(axis=0, ddof=1) / math.sqrt(replicas)  # noqa: E731
    local_z = _z(L.mean(axis=0) - t, se(L))
    left_z = _z(left.mean(axis=0) - (t + 0.5 * cov.variance), se(left))
    m2l, m2r = left ** 2, right ** 2
    sec_z = _z(m2l.mean(axis=0) - m2r.mean(axis=0), np.sqrt(se(m2l) ** 2 + se(m2r) ** 2))
    avg_p = stats.ks_2samp(left.mean(axis=(1, 2)), right.mean(axis=(1, 2))).pvalue
    max_p = stats.ks_2samp(left.max(axis=(1, 2)), right.max(axis=(1, 2))).pvalue
    rep = RayKnightReport(N=N, t=t, replicas=replicas, local_mean_z=local_z,
                          left_mean_z=left_z, second_moment_z=sec_z,
                          ks_average_p=float(avg_p), ks_max_p=float(max_p))
    rep.max_abs_local_z = float(np.max(np.abs(local_z)))
    rep.max_abs_left_z = float(np.max(np.abs(left_z)))
    rep.max_abs_second_z = float(np.max(np.abs(sec_z)))
    rep.passed = (rep.max_abs_local_z <= z_limit and avg_p > p_min)
    return rep


@dataclass
class CltReport:
    N: int
    site: tuple
    t_list: list
    ks: list
    mean_z: list
    variance: float
    passed: bool


def clt_drift_check(N: int, t_list: Sequence[float], replicas: int, seed: int = 0,
                    site=None, ks_limit: float = 0.05, slack: float = 0.02,
                    backend=None) -> CltReport:
    """KS distance of (L_{tau_t}(x) - t)/sqrt(2t) from N(0, C(x,x)) as t grows."""
    cov = gff_covariance(N)
    x = as_point(N, site if site is not None else (N // 2, N // 2))
    var = cov(x, x)
    ks, mz = [], []
    for n_t, t in enumerate(t_list):
        vals = np.array([
            (inverse_local_time(N, t, seed + n_t, r, backend=backend)[x] - t) / math.sqrt(2 * t)
            for r in range(replicas)
        ])
        ks.append(float(stats.kstest(vals, stats.norm(scale=math.sqrt(var)).cdf).statistic))
        mz.append(float(vals.mean() / (vals.std(ddof=1) / math.sqrt(replicas))))
    ok = ks[-1] <= ks_limit and all(b <= a + slack for a, b in zip(ks, ks[1:]))
    return CltReport(N=N, site=tuple(x), t_list=list(t_list), ks=ks, mean_z=mz,
                     variance=var, passed=ok)


@dataclass
class DominationRow:
    functional: str
    a: float
    p_local: float
    p_gff: float
    se: float
    violation: bool


@dataclass
class DominationReport:
    N: int
    t: float
    replicas: int
    rows: list
    violations: int
    passed: bool


def domination_check(N: int, t: float, replicas: int, quantile_grid: Sequence[float] = (0.1, 0.3, 0.5, 0.7, 0.9),
                     seed: int = 0, sites: Optional[Sequence] = None, z: float = 3.0,
                     backend=None) -> DominationReport:
    """One-sided tail comparisons for sqrt(L_{tau_t}) versus max(h + sqrt(2t), 0)/sqrt(2).

    Thresholds ``a`` are taken at the ``quantile_grid`` probabilities of the
    Gaussian side (plus a = 0 for every site).  A violation is
    P(local > a) exceeding P(gff > a) by more than ``z`` standard errors.
    The maximum over sites is checked the same way.
    """
    cov = gff_covariance(N)
    L = local_time_fields(N, t, replicas, seed, backend).reshape(replicas, -1)
    h = gff_samples(cov, replicas, seed, replica=3).reshape(replicas, -1)
    left = np.sqrt(L)
    # same as max(h + sqrt(2t), 0)/sqrt(2), but exact at the pinned origin where L = t
    right = np.maximum(h / math.sqrt(2) + math.sqrt(t), 0.0)
    if sites is None:
        sites = [(0, 0), (0, 1), (1, 1), (N // 4, 0), (N // 2, N // 2), (N // 2, 1)]
    rows = []

    def compare(name, a_vals, lv, rv, extra_zero):
        grid = list(np.quantile(rv, a_vals))
        if extra_zero:
            grid = [0.0] + grid
        for a in grid:
            pl = float(np.mean(lv > a))
            pr = float(np.mean(rv > a))
            se = math.sqrt(pl * (1 - pl) / replicas + pr * (1 - pr) / replicas)
            rows.append(DominationRow(name, float(a), pl, pr, se, pl > pr + z * se))

    for s in sites:
        k = as_point(N, s).index(N)
        compare(f"site{tuple(as_point(N, s))}", quantile_grid, left[:, k], right[:, k], True)
    compare("max", quantile_grid, left.max(axis=1), right.max(axis=1), False)
    v = sum(r.violation for r in rows)
    return DominationReport(N=N, t=t, replicas=replicas, rows=rows, violations=v, passed=v == 0)


def level_census_regression(N_list: Sequence[int], eta: float, samples: int, seed: int = 0):
    """Slope of log E[count] against log N for the GFF level sets."""
    logs_n, logs_c = [], []
    means = {}
    for N in N_list:
        cov = gff_covariance(N)
        hs = gff_samples(cov, samples, seed, replica=N)
        counts = np.array([gff_level_census(hh, eta) for hh in hs])
        means[N] = float(counts.mean())
        if means[N] > 0:
            logs_n.append(math.log(N))
            logs_c.append(math.log(means[N]))
    if len(logs_n) < 2:
        raise ValueError("too few nonzero mean counts to fit a slope")
    fit = stats.linregress(logs_n, logs_c)
    return float(fit.slope), means
