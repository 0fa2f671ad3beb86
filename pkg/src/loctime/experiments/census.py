"""Point censuses on single walks and log-log exponent regression."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from ..excursion import (MultiscaleConfig, TargetCounts, excursion_counts_along_path,
                         multiscale_radii, successful_mask)
from ..torus import ORIGIN, ball
from ..walker import (CoverTime, LocalTimeField, WalkConfig, cover_time_theory,
                      inverse_local_time, run_until, t_theta)

THICK, THIN = "thick", "thin"


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class ThickThinQuery:
    theta: float
    eta: float
    sign: str = THICK

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.sign not in (THICK, THIN):
            raise ValueError(f"sign must be {THICK!r} or {THIN!r}")

    @property
    def vacuous(self) -> bool:
        """Thin sets at theta <= 1 carry no prediction."""
        return self.sign == THIN and self.theta <= 1


@dataclass(frozen=True)
class PointCensus:
    N: int
    query: ThickThinQuery
    count: int
    seed: int
    tau_value: float
    replica: int = 0
    elapsed_wall: float = field(default=0.0, compare=False)


def deviation_scale(N: int) -> float:
    """2 sqrt(2/pi) log N, the unit of normalised local-time deviations."""
    return 2 * math.sqrt(2 / math.pi) * math.log(N)


def thick_thin_count(lt: LocalTimeField, t: float, eta: float, sign: str = THICK) -> int:
    """Sites whose (L(x) - t)/sqrt(2t) is >= eta (thick) or <= -eta (thin) in deviation units."""
    z = lt.normalized(t)
    a = eta * deviation_scale(lt.N)
    if sign == THICK:
        return int(np.count_nonzero(z >= a))
    if sign == THIN:
        return int(np.count_nonzero(z <= -a))
    raise ValueError(f"unknown sign {sign!r}")


def census_thick_thin(N: int, query: ThickThinQuery, seed: int, replica: int = 0,
                      backend=None) -> PointCensus:
    t0 = time.perf_counter()
    t = t_theta(N, query.theta)
    lt = inverse_local_time(N, t, seed, replica, backend=backend)
    count = thick_thin_count(lt, t, query.eta, query.sign)
    return PointCensus(N=N, query=query, count=count, seed=seed, tau_value=lt.elapsed,
                       replica=replica, elapsed_wall=time.perf_counter() - t0)


def late_point_counts(N: int, etas: Sequence[float], seed: int, replica: int = 0,
                      backend=None) -> tuple[list[int], float]:
    """Counts of sites first visited after eta * (4/pi) N^2 (log N)^2, one cover run."""
    for eta in etas:
        if not eta > 0:
            raise ValueError("eta must be positive")
    lt = run_until(WalkConfig(N=N, seed=seed, replica=replica), CoverTime(), backend=backend)
    tc = cover_time_theory(N)
    return [int(np.count_nonzero(lt.first_visit >= eta * tc)) for eta in etas], lt.elapsed


def late_point_census(N: int, eta: float, seed: int, replica: int = 0, backend=None) -> int:
    return late_point_counts(N, [eta], seed, replica, backend)[0][0]


@dataclass(frozen=True)
class Extremes:
    max_norm: float
    min_norm: float
    min_local_time: float
    tau_value: float


def extremes_of(lt: LocalTimeField, t: float) -> Extremes:
    z = lt.normalized(t)
    s = deviation_scale(lt.N)
    return Extremes(max_norm=float(z.max() / s), min_norm=float(z.min() / s),
                    min_local_time=float(lt.occupation.min()), tau_value=lt.elapsed)


def extreme_normalized(N: int, theta: float, seed: int, replica: int = 0,
                       backend=None) -> Extremes:
    """Normalised max and min of L_{tau_t} at t = t_theta; limits are 1 +/- 1/(2 sqrt(theta))."""
    t = t_theta(N, theta)
    return extremes_of(inverse_local_time(N, t, seed, replica, backend=backend), t)


def successful_counts(N: int, cfg: MultiscaleConfig, targets: Sequence[TargetCounts], seed: int,
                      replica: int = 0, theta: Optional[float] = None,
                      backend=None) -> tuple[list[int], float]:
    """Successful-center counts for several target profiles sharing one n_0 and
    one walk run to tau_{t_theta}; also returns tau."""
    if not targets:
        raise ValueError("no target profiles")
    n0 = targets[0].n0
    if any(tc.n0 != n0 for tc in targets):
        raise ValueError("target profiles must share the top-level budget n_0")
    th = targets[0].theta if theta is None else theta
    if not th > 0:
        raise ValueError("theta must be given, either directly or through the targets")
    radii = multiscale_radii(cfg).bind(N)
    lt = inverse_local_time(N, t_theta(N, th), seed, replica, backend=backend, record_path=True)
    outside = ~ball(N, ORIGIN, radii[0]).mask.ravel()
    pc = excursion_counts_along_path(N, lt.path, radii, n0,
                                     centers=np.flatnonzero(outside), backend=backend)
    eligible = pc.completed & outside
    counts = [int(np.count_nonzero(successful_mask(pc.counts, tc, cfg.n) & eligible))
              for tc in targets]
    return counts, lt.elapsed


def successful_census(N: int, cfg: MultiscaleConfig, targets: TargetCounts, seed: int,
                      replica: int = 0, theta: Optional[float] = None, backend=None) -> int:
    """Centers outside D(0, r_0) that complete n_0 top-level excursions with every
    intermediate count inside its window, all read off one walk run to tau_{t_theta}."""
    return successful_counts(N, cfg, [targets], seed, replica, theta, backend)[0][0]


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    points: int
    distinct_N: int
    dropped_zeros: int

    @property
    def zeros_dropped(self) -> bool:
        return self.dropped_zeros > 0


def exponent_fit(results: Iterable) -> ExponentFit:
    """Least-squares slope of log(count) against log(N).

    ``results`` holds PointCensus records or (N, count) pairs.  Zero counts
    are dropped and reported; at least three distinct N must remain.
    """
    pairs = [(r.N, r.count) if isinstance(r, PointCensus) else (r[0], r[1]) for r in results]
    kept = [(n, c) for n, c in pairs if c > 0]
    dropped = len(pairs) - len(kept)
    distinct = len({n for n, _ in kept})
    if distinct < 3:
        raise InsufficientData(f"need 3 distinct N with nonzero counts, have {distinct} "
                               f"({dropped} zero counts dropped)")
    x = np.log([float(n) for n, _ in kept])
    y = np.log([float(c) for _, c in kept])
    fit = stats.linregress(x, y)
    return ExponentFit(slope=float(fit.slope), intercept=float(fit.intercept),
                       stderr=float(fit.stderr), points=len(kept), distinct_N=distinct,
                       dropped_zeros=dropped)


def thick_exponent(theta: float, eta: float) -> float:
    """Predicted log_N |thick set|: 2 - 2(sqrt(theta + 2 eta sqrt(theta)) - sqrt(theta))^2."""
    st = math.sqrt(theta)
    return 2 - 2 * (math.sqrt(theta + 2 * eta * st) - st) ** 2


def thin_exponent(theta: float, eta: float) -> float:
    """Predicted log_N |thin set|: 2 - 2(sqrt(theta) - sqrt(theta - 2 eta sqrt(theta)))^2."""
    st = math.sqrt(theta)
    inner = theta - 2 * eta * st
    if inner < 0:
        return float("-inf")
    return 2 - 2 * (st - math.sqrt(inner)) ** 2


def late_exponent(eta: float) -> float:
    return 2 - 2 * eta
