"""Continuous-time simple random walk on Z_N^2 with Exp(1) holding times.

The walk is realised as a discrete skeleton (uniform over the four
neighbours) plus i.i.d. Exp(1) holding times.  Random input is drawn in
chunks and handed to the kernels in :mod:`loctime.kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import kernels as K
from . import rng as rngmod
from .torus import ORIGIN, PointSet, TorusPoint, as_point, neighbour_table

DEFAULT_MAX_STEPS = 10**10
_FIRST_CHUNK = 1024
_MAX_CHUNK = 1 << 20


class StepCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    N: int
    start: TorusPoint = ORIGIN
    seed: int = 0
    replica: int = 0
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        object.__setattr__(self, "start", as_point(self.N, self.start))


@dataclass(frozen=True)
class HitSet:
    target: PointSet

    def __post_init__(self):
        if len(self.target) == 0:
            raise ValueError("empty target set")


@dataclass(frozen=True)
class InverseLocalTime:
    site: TorusPoint
    level: float

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError("level must be positive")


@dataclass(frozen=True)
class CoverTime:
    pass


@dataclass(frozen=True)
class FixedTime:
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")


StopRule = Union[HitSet, InverseLocalTime, CoverTime, FixedTime]


@dataclass
class LocalTimeField:
    """Occupation times of one run.

    ``first_visit`` holds entry times (``inf`` for unvisited sites); it is
    ``None`` for inverse-local-time runs, which carry no time ordering away
    from the pinned site.
    """

    N: int
    occupation: np.ndarray
    elapsed: float
    visited_count: int
    skeleton_steps: int
    final: TorusPoint
    first_visit: Optional[np.ndarray] = None
    path: Optional[np.ndarray] = field(default=None, repr=False)

    def __getitem__(self, x) -> float:
        p = as_point(self.N, x)
        return float(self.occupation[p.i, p.j])

    def normalized(self, t: float) -> np.ndarray:
        """(L(x) - t) / sqrt(2t)."""
        return (self.occupation - t) / math.sqrt(2.0 * t)


def t_theta(N: int, theta: float) -> float:
    if N < 2:
        raise ValueError("N must be at least 2")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    return 4.0 / math.pi * theta * math.log(N) ** 2


def cover_time_theory(N: int) -> float:
    """Leading-order cover time (4/pi) N^2 (log N)^2."""
    return 4.0 / math.pi * N * N * math.log(N) ** 2


_NBR_CACHE: dict[int, np.ndarray] = {}


def _neighbours(N: int) -> np.ndarray:
    nbr = _NBR_CACHE.get(N)
    if nbr is None:
        nbr = neighbour_table(N)
        nbr.setflags(write=False)
        _NBR_CACHE[N] = nbr
    return nbr


def _chunks(first: int = _FIRST_CHUNK):
    size = first
    while True:
        yield size
        size = min(2 * size, _MAX_CHUNK)


def run_until(config: WalkConfig, stop: StopRule, backend=None,
              record_path: bool = False) -> LocalTimeField:
    """Simulate one walk from ``config.start`` until ``stop`` fires."""
    kern = K.get_backend(backend)
    if isinstance(stop, InverseLocalTime):
        return _run_inverse_local_time(config, stop, kern, record_path)
    return _run_explicit(config, stop, kern, record_path)


def _run_explicit(config, stop, kern, record_path):
    N = config.N
    nn = N * N
    nbr = _neighbours(N)
    start = config.start.index(N)
    occ = np.zeros(nn)
    first_visit = np.full(nn, -1.0)
    first_visit[start] = 0.0
    ist = np.array([start, 1], dtype=np.int64)
    fst = np.zeros(1)
    target = np.zeros(nn, dtype=np.uint8)
    horizon = 0.0
    if isinstance(stop, HitSet):
        if stop.target.N != N:
            raise ValueError("target set lives on a different torus")
        mode = K.HIT
        target[stop.target.indices] = 1
    elif isinstance(stop, FixedTime):
        mode = K.FIXED
        horizon = float(stop.horizon)
    elif isinstance(stop, CoverTime):
        mode = K.COVER
    else:
        raise TypeError(f"unsupported stop rule {stop!r}")

    steps = 0
    pieces = []
    done = (mode == K.HIT and target[start]) or (mode == K.COVER and nn == 1)
    if not done:
        gen = rngmod.replica_rng(config.seed, config.replica, rngmod.WALK)
        for size in _chunks():
            dirs = gen.integers(0, 4, size, dtype=np.uint8)
            holds = gen.standard_exponential(size)
            used, done = kern.walk_explicit(nbr, mode, ist, fst, occ, first_visit,
                                            target, horizon, dirs, holds)
            moved = used - 1 if (done and mode == K.FIXED) else used
            steps += moved
            if record_path:
                pieces.append(dirs[:moved])
            if done:
                break
            if steps >= config.max_steps:
                raise StepCapExceeded(f"no stop after {steps} skeleton steps")
    fv = np.where(first_visit < 0, np.inf, first_visit).reshape(N, N)
    return LocalTimeField(
        N=N, occupation=occ.reshape(N, N), elapsed=float(fst[0]),
        visited_count=int(ist[1]), skeleton_steps=steps,
        final=as_point(N, int(ist[0])), first_visit=fv,
        path=_assemble_path(nbr, start, pieces) if record_path else None,
    )


def _run_inverse_local_time(config, stop, kern, record_path):
    # Only holdings at the pinned site decide when to stop; holdings elsewhere
    # are summed afterwards as Gamma(visits, 1) draws, which is the same law.
    N = config.N
    nn = N * N
    nbr = _neighbours(N)
    start = config.start.index(N)
    site = as_point(N, stop.site).index(N)
    level = float(stop.level)
    visits = np.zeros(nn, dtype=np.int64)
    ist = np.array([start, 0, 0], dtype=np.int64)
    fst = np.zeros(1)
    walk_gen = rngmod.replica_rng(config.seed, config.replica, rngmod.WALK)
    hold_gen = rngmod.replica_rng(config.seed, config.replica, rngmod.GAMMA)
    dir_sizes, hold_sizes = _chunks(), _chunks(64)
    dirs = np.empty(0, dtype=np.uint8)
    holds = np.empty(0)
    steps = 0
    pieces = []
    while True:
        if ist[1] >= dirs.shape[0]:
            if record_path and dirs.shape[0]:
                pieces.append(dirs)
            steps += dirs.shape[0]
            if steps >= config.max_steps:
                raise StepCapExceeded(f"no stop after {steps} skeleton steps")
            dirs = walk_gen.integers(0, 4, next(dir_sizes), dtype=np.uint8)
            ist[1] = 0
        if ist[2] >= holds.shape[0]:
            holds = hold_gen.standard_exponential(next(hold_sizes))
            ist[2] = 0
        if kern.walk_skeleton(nbr, ist, fst, visits, site, level, dirs, holds):
            break
    used = int(ist[1])
    steps += used
    if record_path:
        pieces.append(dirs[:used])
    occ = np.zeros(nn)
    others = np.flatnonzero(visits)
    others = others[others != site]
    gamma_gen = rngmod.replica_rng(config.seed, config.replica, rngmod.AUX)
    occ[others] = gamma_gen.standard_gamma(visits[others].astype(np.float64))
    occ[site] = level
    return LocalTimeField(
        N=N, occupation=occ.reshape(N, N), elapsed=float(math.fsum(occ)),
        visited_count=int(np.count_nonzero(visits)), skeleton_steps=steps,
        final=as_point(N, int(ist[0])), first_visit=None,
        path=_assemble_path(nbr, start, pieces) if record_path else None,
    )


def _assemble_path(nbr, start, pieces):
    from ._kernels_py import _path

    dirs = np.concatenate(pieces) if pieces else np.empty(0, dtype=np.uint8)
    return _path(nbr, start, dirs)


def inverse_local_time(N: int, t: float, seed: int = 0, replica: int = 0,
                       backend=None, record_path: bool = False) -> LocalTimeField:
    """Local times at tau_t for the walk started and pinned at the origin."""
    cfg = WalkConfig(N=N, start=ORIGIN, seed=seed, replica=replica)
    return run_until(cfg, InverseLocalTime(ORIGIN, t), backend=backend,
                     record_path=record_path)


@dataclass(frozen=True)
class CoverStats:
    N: int
    mean: float
    sd: float
    ratio_to_theory: float
    samples: np.ndarray = field(repr=False)


def cover_time_stats(N: int, replicas: int, seed: int, backend=None) -> CoverStats:
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    times = np.array([
        run_until(WalkConfig(N=N, seed=seed, replica=r), CoverTime(), backend=backend).elapsed
        for r in range(replicas)
    ])
    sd = float(times.std(ddof=1)) if replicas > 1 else 0.0
    mean = float(times.mean())
    return CoverStats(N=N, mean=mean, sd=sd, ratio_to_theory=mean / cover_time_theory(N),
                      samples=times)


@dataclass(frozen=True)
class TauReport:
    N: int
    t: float
    replicas: int
    mean: float
    stderr: float
    mean_abs_dev: float
    q95: float
    band: float
    constant: float
    passed: bool
    samples: np.ndarray = field(repr=False)

    @property
    def mean_z(self) -> float:
        """(mean - tN^2) / stderr."""
        return (self.mean - self.t * self.N ** 2) / self.stderr


def tau_concentration_check(N: int, t: float, replicas: int, seed: int = 0,
                            constant: float = 5.0, backend=None) -> TauReport:
    """Empirical spread of tau_t around tN^2.

    ``band`` is the fitted constant q95(|tau_t - tN^2|) / (sqrt(t log N) N^2);
    the check passes when it does not exceed ``constant``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if replicas < 30:
        raise ValueError("at least 30 replicas are required")
    taus = np.array([inverse_local_time(N, t, seed, r, backend=backend).elapsed
                     for r in range(replicas)])
    dev = np.abs(taus - t * N * N)
    q95 = float(np.quantile(dev, 0.95))
    band = q95 / (math.sqrt(t * math.log(N)) * N * N)
    return TauReport(N=N, t=t, replicas=replicas, mean=float(taus.mean()),
                     stderr=float(taus.std(ddof=1) / math.sqrt(replicas)),
                     mean_abs_dev=float(dev.mean()), q95=q95, band=band,
                     constant=constant, passed=band <= constant, samples=taus)
