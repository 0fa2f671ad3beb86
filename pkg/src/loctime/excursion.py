"""Multiscale excursion decomposition around a center.

Concentric radii r_0 > r_1 > ... > r_n; level l counts excursions from
bd D(x, r_{l+1}) out to bd D(x, r_l).  Counting follows the stopping-time
order: a level starts counting only after its first entry to the inner
boundary.  Boundary detection is by site membership.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from . import kernels as K
from . import rng as rngmod
from .torus import TorusPoint, as_point, neighbours_mask, squared_distance_field
from .walker import (FixedTime, InverseLocalTime, StepCapExceeded, WalkConfig,
                     _chunks, _neighbours)


class RadiiCollapse(ValueError):
    pass


class EtaOutOfRange(ValueError):
    pass


class LevelMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PaperRadii:
    pass


@dataclass(frozen=True)
class LabRadii:
    R0: float
    rho: float


@dataclass(frozen=True)
class MultiscaleConfig:
    n: int
    mode: Union[PaperRadii, LabRadii] = PaperRadii()
    b: float = 0.0
    gamma_bar: Optional[float] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("depth n must be at least 2")
        if self.gamma_bar is None:
            object.__setattr__(self, "gamma_bar", float(self.b))
        if not (self.b <= self.gamma_bar <= self.b + 4):
            raise ValueError("gamma_bar must lie in [b, b + 4]")
        if isinstance(self.mode, LabRadii):
            if self.mode.rho <= 1:
                raise ValueError("rho must exceed 1")


@dataclass(frozen=True)
class Radii:
    values: tuple
    K: Optional[float] = None
    N: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, k):
        return self.values[k]

    def bind(self, N: int) -> "Radii":
        """Attach a torus side, checking that every boundary fits."""
        if self.values[-1] < 2:
            raise RadiiCollapse(f"innermost radius {self.values[-1]} is below 2")
        if self.values[0] >= N / 2:
            raise RadiiCollapse(f"outer radius {self.values[0]} must be below N/2 = {N / 2}")
        for a, b in zip(self.values, self.values[1:]):
            if a < b + 1:
                raise RadiiCollapse(f"radii {a} and {b} are too close to separate boundaries")
        return Radii(self.values, self.K, N)


def multiscale_radii(cfg: MultiscaleConfig) -> Radii:
    n = cfg.n
    if isinstance(cfg.mode, LabRadii):
        vals = tuple(cfg.mode.R0 * cfg.mode.rho ** (-k) for k in range(n + 1))
        if vals[-1] < 2:
            raise RadiiCollapse(f"innermost radius {vals[-1]:g} is below 2")
        return Radii(vals, None)
    vals = tuple(math.exp(n) * float(n) ** (3 * (n - k)) for k in range(n + 1))
    return Radii(vals, float(n) ** cfg.gamma_bar * vals[0])


def lab_radii(n: int, R0: float, rho: float, N: Optional[int] = None) -> Radii:
    r = multiscale_radii(MultiscaleConfig(n=n, mode=LabRadii(R0, rho)))
    return r.bind(N) if N is not None else r


@dataclass(frozen=True)
class TargetCounts:
    n_ell: np.ndarray
    theta: float = float("nan")
    eta: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "n_ell", np.asarray(self.n_ell, dtype=np.int64))

    @property
    def n0(self) -> int:
        return int(self.n_ell[0])


def target_counts(n: int, theta: float, eta: float) -> TargetCounts:
    """Linear-in-sqrt target profile for the excursion counts."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    limit = 1 + 1 / (2 * math.sqrt(theta))
    if eta < 0 or eta >= limit:
        raise EtaOutOfRange(f"eta={eta} outside [0, {limit:.6g})")
    st = math.sqrt(theta)
    slope = math.sqrt(theta + 2 * eta * st) - st
    pref = 6 * (1 - n ** -0.25) * n * n * math.log(n)
    vals = [math.ceil(pref * (st + slope * l / n) ** 2) for l in range(n)]
    return TargetCounts(np.array(vals, dtype=np.int64), theta, eta)


def boundary_bits(N: int, center, radii: Radii) -> np.ndarray:
    """Per-site bitmask: bit k set when the site lies on bd D(center, r_k)."""
    d2 = squared_distance_field(N, center)
    bits = np.zeros((N, N), dtype=np.uint32)
    for k, r in enumerate(radii.values):
        inside = d2 < r * r
        bits[neighbours_mask(inside) & ~inside] |= np.uint32(1 << k)
    return bits.ravel()


@dataclass(frozen=True)
class ExcursionBudget:
    """Stop at the return to bd D(x, r_1) that closes the n0-th top excursion."""

    n0: int

    def __post_init__(self):
        if self.n0 < 0:
            raise ValueError("n0 must be nonnegative")


@dataclass
class ExcursionRecord:
    center: TorusPoint
    level_counts: np.ndarray
    durations: np.ndarray
    deepest_local_times: np.ndarray
    elapsed: float
    top_entries: int
    completed: bool

    @property
    def n(self) -> int:
        return int(self.level_counts.size)


def excursion_trace(config: WalkConfig, center, radii: Radii, horizon,
                    backend=None) -> ExcursionRecord:
    """One walk; counts, top-level cycle durations and deepest local times.

    ``durations`` are the successive top-level cycle lengths (entry to
    bd D(r_1) to the next entry after visiting bd D(r_0)).
    ``deepest_local_times`` are the center's local times accumulated from
    each entry to bd D(r_n) until the following exit to bd D(r_{n-1}).
    """
    kern = K.get_backend(backend)
    N = config.N
    if radii.N != N:
        radii = radii.bind(N)
    c = as_point(N, center)
    bits = boundary_bits(N, c, radii)
    nlev = radii.n
    nbr = _neighbours(N)
    site = -1
    if isinstance(horizon, InverseLocalTime):
        mode, param = K.INVLT, float(horizon.level)
        site = as_point(N, horizon.site).index(N)
    elif isinstance(horizon, FixedTime):
        mode, param = K.FIXED, float(horizon.horizon)
    elif isinstance(horizon, ExcursionBudget):
        mode, param = K.BUDGET, float(horizon.n0)
    else:
        raise TypeError(f"unsupported horizon {horizon!r}")
    ist = np.array([config.start.index(N), 1, 0, 0, 0, 0, 0], dtype=np.int64)
    fst = np.zeros(4)
    lev_state = np.zeros(nlev, dtype=np.uint8)
    counts = np.zeros(nlev, dtype=np.int64)
    durations = np.zeros(256)
    deep = np.zeros(256)
    gen = rngmod.replica_rng(config.seed, config.replica, rngmod.WALK)
    steps = 0
    sizes = _chunks()
    dirs = np.empty(0, dtype=np.uint8)
    holds = np.empty(0)
    off = 0
    while True:
        status = kern.excursion_scan(nbr, bits, nlev, c.index(N), site, mode, param,
                                     ist, fst, lev_state, counts, durations, deep,
                                     dirs[off:], holds[off:])
        off += int(ist[6])
        if status == K.DONE:
            break
        if status == K.FULL:
            durations = np.concatenate([durations, np.zeros(durations.size)])
            deep = np.concatenate([deep, np.zeros(deep.size)])
            continue
        steps += dirs.size
        if steps >= config.max_steps:
            raise StepCapExceeded(f"no stop after {steps} skeleton steps")
        size = next(sizes)
        dirs = gen.integers(0, 4, size, dtype=np.uint8)
        holds = gen.standard_exponential(size)
        off = 0
    return ExcursionRecord(
        center=c, level_counts=counts.copy(),
        durations=durations[:ist[4]].copy(), deepest_local_times=deep[:ist[5]].copy(),
        elapsed=float(fst[0]), top_entries=int(ist[2]), completed=True,
    )


def ring_offsets(N: int, radii: Radii):
    """Offsets (di, dj, bits) of every boundary site relative to a center at 0."""
    bits = boundary_bits(N, (0, 0), radii)
    idx = np.flatnonzero(bits)
    oi, oj = np.divmod(idx, N)
    return oi.astype(np.int64), oj.astype(np.int64), bits[idx].astype(np.uint32)


@dataclass
class PathCounts:
    counts: np.ndarray      # (N*N, n) excursion counts per center
    completed: np.ndarray   # (N*N,) center reached its top-level budget
    active: np.ndarray


def excursion_counts_along_path(N: int, path: np.ndarray, radii: Radii, n0: int,
                                centers: Optional[np.ndarray] = None,
                                backend=None) -> PathCounts:
    """Per-center counts on a recorded skeleton path, each center stopped at
    its own budget of n0 top-level excursions."""
    kern = K.get_backend(backend)
    if radii.N != N:
        radii = radii.bind(N)
    nlev = radii.n
    active = np.zeros(N * N, dtype=np.uint8)
    if centers is None:
        active[:] = 1
    else:
        active[np.asarray(centers, dtype=np.int64)] = 1
    done = np.zeros(N * N, dtype=np.uint8)
    lev_state = np.zeros(N * N * nlev, dtype=np.uint8)
    counts = np.zeros(N * N * nlev, dtype=np.int32)
    taus = np.zeros(N * N, dtype=np.int64)
    oi, oj, ob = ring_offsets(N, radii)
    kern.census_scan(N, np.ascontiguousarray(path, dtype=np.int64), oi, oj, ob, nlev,
                     active, done, lev_state, counts, taus, int(n0))
    return PathCounts(counts=counts.reshape(N * N, nlev), completed=done.astype(bool),
                      active=active.astype(bool))


def is_successful(rec: ExcursionRecord, targets: TargetCounts, n: int) -> bool:
    counts = np.asarray(rec.level_counts if isinstance(rec, ExcursionRecord) else rec)
    return bool(successful_mask(counts[None, :], targets, n)[0])


def successful_mask(counts: np.ndarray, targets: TargetCounts, n: int) -> np.ndarray:
    """Row-wise |N_l - n_l| <= n for 1 <= l <= n-1."""
    counts = np.atleast_2d(counts)
    if counts.shape[1] < n or targets.n_ell.size < n:
        raise LevelMismatch(f"need counts for levels 1..{n - 1}")
    dev = np.abs(counts[:, 1:n] - targets.n_ell[None, 1:n])
    return np.all(dev <= n, axis=1)


def _disc_offsets(rho: float) -> np.ndarray:
    m = int(math.ceil(rho))
    a = np.arange(-m, m + 1)
    di, dj = np.meshgrid(a, a, indexing="ij")
    keep = di * di + dj * dj < rho * rho
    return np.stack([di[keep], dj[keep]], axis=1)


def _discs_meet(x, y, rho: float, N: Optional[int]) -> bool:
    pts = _disc_offsets(rho) + np.array([x[0], x[1]])
    dy = pts - np.array([y[0], y[1]])
    if N is not None:
        dy = np.abs(dy) % N
        dy = np.minimum(dy, N - dy)
    return bool(np.any((dy * dy).sum(axis=1) < rho * rho))


def separation_scale(x, y, radii: Radii, n: int, N: Optional[int] = None) -> int:
    """Smallest l with D(x, r_l + 1) and D(y, r_l + 1) disjoint, capped at n."""
    N = N if N is not None else radii.N
    for l in range(min(n, radii.n + 1)):
        if not _discs_meet(tuple(x), tuple(y), radii[l] + 1, N):
            return l
    return n


def _nb_logpmf(k: np.ndarray, m: np.ndarray) -> np.ndarray:
    """log P(k failures before the m-th success), p = 1/2; m = 0 puts mass on 0."""
    k = np.asarray(k, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = gammaln(k + m) - gammaln(m) - gammaln(k + 1) - (k + m) * math.log(2)
    out = np.where(m == 0, np.where(k == 0, 0.0, -np.inf), out)
    return out


def _windows(targets: TargetCounts, n: int, window: int):
    return [np.arange(max(0, int(targets.n_ell[l]) - window), int(targets.n_ell[l]) + window + 1)
            for l in range(1, n)]


def qn_log(n: int, targets: TargetCounts, window: Optional[int] = None,
           m0: Optional[int] = None) -> float:
    """log q_n by dynamic programming over levels, in the log domain."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if targets.n_ell.size < n:
        raise LevelMismatch("targets do not cover levels 0..n-1")
    w = n if window is None else int(window)
    start = targets.n0 if m0 is None else int(m0)
    wins = _windows(targets, n, w)
    logv = _nb_logpmf(wins[0], np.array(start))
    for prev, cur in zip(wins, wins[1:]):
        trans = _nb_logpmf(cur[None, :], prev[:, None])
        logv = logsumexp(logv[:, None] + trans, axis=0)
    return float(logsumexp(logv))


def qn_exact(n: int, targets: TargetCounts, window: Optional[int] = None,
             m0: Optional[int] = None) -> float:
    """Sum over windowed m_1..m_{n-1} of the product of NB(m_{l-1}, 1/2) weights."""
    return math.exp(qn_log(n, targets, window, m0))


def qn_chain_monte_carlo(n: int, targets: TargetCounts, replicas: int, seed: int = 0,
                         window: Optional[int] = None, m0: Optional[int] = None):
    """Fraction of simulated chains N_l | N_{l-1} ~ NB(N_{l-1}, 1/2) that stay
    inside every window; returns (estimate, standard error)."""
    w = n if window is None else int(window)
    gen = rngmod.replica_rng(seed, 0, rngmod.AUX)
    m = np.full(replicas, targets.n0 if m0 is None else int(m0), dtype=np.int64)
    ok = np.ones(replicas, dtype=bool)
    for l in range(1, n):
        nxt = np.zeros_like(m)
        pos = m > 0
        nxt[pos] = gen.negative_binomial(m[pos], 0.5)
        m = nxt
        ok &= np.abs(m - int(targets.n_ell[l])) <= w
    p = ok.mean()
    return float(p), float(math.sqrt(p * (1 - p) / replicas))


def stirling_rate(u):
    """f(u) = (1+u) log(1+u) - u log u - (1+u) log 2; f(1) = 0."""
    u = np.asarray(u, dtype=np.float64)
    return (1 + u) * np.log1p(u) - u * np.log(u) - (1 + u) * math.log(2)


def thick_exponent_gap(theta: float, eta: float) -> float:
    """(sqrt(theta + 2 eta sqrt(theta)) - sqrt(theta))^2."""
    st = math.sqrt(theta)
    return (math.sqrt(theta + 2 * eta * st) - st) ** 2


def radii_log_K(n: int, gamma_bar: float) -> float:
    return gamma_bar * math.log(n) + n + 3 * n * math.log(n)


@dataclass(frozen=True)
class QnEnvelope:
    n: int
    lower: float
    upper: float
    c1: float
    c2: float
    log_K: float


def qn_asymptotic_bounds(n: int, theta: float, eta: float, c1: float, c2: float,
                         gamma_bar: float = 0.0) -> QnEnvelope:
    """exp(-c n log log n) K_n^(-2 gap) at c = c1 (lower) and c = c2 (upper)."""
    if n < 3:
        raise ValueError("n log log n is not positive below n = 3")
    lk = radii_log_K(n, gamma_bar)
    base = -2 * thick_exponent_gap(theta, eta) * lk
    s = n * math.log(math.log(n))
    return QnEnvelope(n=n, lower=math.exp(base - c1 * s), upper=math.exp(base - c2 * s),
                      c1=c1, c2=c2, log_K=lk)


def qn_envelope_constant(n: int, theta: float, eta: float, gamma_bar: float = 0.0) -> float:
    """The c at which the envelope equals qn_exact for the formula targets."""
    if n < 3:
        raise ValueError("n must be at least 3")
    lq = qn_log(n, target_counts(n, theta, eta))
    lk = radii_log_K(n, gamma_bar)
    return -(lq + 2 * thick_exponent_gap(theta, eta) * lk) / (n * math.log(math.log(n)))


def fit_qn_envelope(n_list: Sequence[int], theta: float, eta: float,
                    gamma_bar: float = 0.0) -> tuple[float, float]:
    """Fitted (c1, c2): the tightest constants bracketing q_n over ``n_list``."""
    cs = [qn_envelope_constant(n, theta, eta, gamma_bar) for n in n_list]
    return max(cs), min(cs)


@dataclass
class TransitionDiagnostic:
    level: int
    pairs: int
    chi2: float
    dof: int
    p_value: float
    passed: bool
    groups: dict = field(default_factory=dict)


def nb_transition_diagnostic(pairs: np.ndarray, level: int = 0, min_group: int = 30,
                             alpha: float = 1e-3) -> TransitionDiagnostic:
    """Chi-square of N_{l+1} given N_l = m against NB(m, 1/2), pooled over m.

    ``pairs`` is an (R, 2) array of (N_l, N_{l+1}).  Groups with fewer than
    ``min_group`` samples are skipped; bins are merged until every expected
    count is at least 5.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    chi2 = 0.0
    dof = 0
    groups = {}
    for m in np.unique(pairs[:, 0]):
        if m <= 0:
            continue
        obs = pairs[pairs[:, 0] == m, 1]
        if obs.size < min_group:
            continue
        exp, got = _binned_counts(obs, stats.nbinom(int(m), 0.5))
        if exp.size < 2:
            continue
        c = float(((got - exp) ** 2 / exp).sum())
        chi2 += c
        dof += exp.size - 1
        groups[int(m)] = (int(obs.size), c)
    p = float(stats.chi2.sf(chi2, dof)) if dof > 0 else float("nan")
    return TransitionDiagnostic(level=level, pairs=int(len(pairs)), chi2=chi2, dof=dof,
                                p_value=p, passed=bool(dof > 0 and p > alpha), groups=groups)


def _binned_counts(obs: np.ndarray, dist) -> tuple[np.ndarray, np.ndarray]:
    """Expected and observed counts on integer bins with expected >= 5."""
    n = obs.size
    lows = [0]
    acc = 0.0
    k = 0
    while dist.sf(k - 1) * n >= 10:
        acc += dist.pmf(k) * n
        k += 1
        if acc >= 5:
            lows.append(k)
            acc = 0.0
    lows = np.array(lows)
    cdf_below = dist.cdf(lows - 1)
    exp = np.diff(np.append(cdf_below, 1.0)) * n
    if exp[-1] < 5 and exp.size > 1:
        lows = lows[:-1]
        exp = np.append(exp[:-2], exp[-2] + exp[-1])
    got = np.bincount(np.searchsorted(lows, obs, side="right") - 1, minlength=lows.size)
    return exp, got
