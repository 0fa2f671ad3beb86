"""Killed-walk Green's functions by direct linear solves.

G_A(x0, x) is the expected time spent at ``x`` before the walk started at
``x0`` leaves ``A`` (hits its outer boundary).  With unit mean holding times
this equals the expected number of visits, so ``G_A(., x)`` solves
``(I - P) g = 1_x`` on ``A`` with ``g = 0`` off ``A``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .torus import PointSet, as_point, ball, ball_boundary, neighbour_table, torus_distance

DIRECT_LIMIT = 20_000
CG_RTOL = 1e-10


class SiteOutsideRegion(ValueError):
    pass


class SingularSystem(np.linalg.LinAlgError):
    pass


class GeometryViolation(ValueError):
    pass


def transition_operator(N: int, A: PointSet) -> sp.csr_matrix:
    """I - P restricted to ``A`` (rows and columns in ``A.indices`` order)."""
    idx = A.indices
    local = np.full(N * N, -1, dtype=np.int64)
    local[idx] = np.arange(idx.size)
    nbr = neighbour_table(N)[idx]
    rows = np.repeat(np.arange(idx.size), 4)
    cols = local[nbr.ravel()]
    keep = cols >= 0
    P = sp.coo_matrix((np.full(keep.sum(), 0.25), (rows[keep], cols[keep])),
                      shape=(idx.size, idx.size)).tocsr()
    return (sp.identity(idx.size, format="csr") - P).tocsc()


class _Solver:
    """Factorised I - P on one region; reused for many right-hand sides."""

    def __init__(self, N: int, A: PointSet):
        if len(A) == 0:
            raise ValueError("empty region")
        if len(A) == N * N:
            raise SingularSystem("the walk never leaves the full torus")
        self.N = N
        self.A = A
        self.M = transition_operator(N, A)
        self.local = np.full(N * N, -1, dtype=np.int64)
        self.local[A.indices] = np.arange(len(A))
        self._lu = None
        if len(A) <= DIRECT_LIMIT:
            try:
                self._lu = spla.splu(self.M)
            except RuntimeError as exc:
                raise SingularSystem(str(exc)) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(rhs)
        # I - P has unit diagonal, so Jacobi preconditioning is the identity
        out, info = spla.cg(self.M, rhs, rtol=CG_RTOL, atol=0.0, maxiter=50 * len(self.A))
        if info != 0:
            raise SingularSystem(f"conjugate gradient did not converge (info={info})")
        return out

    def position(self, x) -> int:
        k = self.local[as_point(self.N, x).index(self.N)]
        if k < 0:
            raise SiteOutsideRegion(f"{tuple(as_point(self.N, x))} is not in the region")
        return int(k)

    def column(self, x) -> np.ndarray:
        """G_A(., x) on the region."""
        e = np.zeros(len(self.A))
        e[self.position(x)] = 1.0
        return self.solve(e)


_SOLVERS: dict = {}


def solver(N: int, A: PointSet) -> _Solver:
    key = (N, A)
    s = _SOLVERS.get(key)
    if s is None:
        if len(_SOLVERS) > 32:
            _SOLVERS.clear()
        s = _SOLVERS[key] = _Solver(N, A)
    return s


def green_exact(N: int, A: PointSet, x0, x) -> float:
    s = solver(N, A)
    s.position(x0)
    return float(s.column(x)[s.position(x0)])


@dataclass(frozen=True)
class GreenMatrix:
    """Dense G_A on a region; rows/columns follow ``region.indices``."""

    N: int
    region: PointSet
    values: np.ndarray = field(repr=False)

    def __call__(self, x0, x) -> float:
        loc = {int(k): n for n, k in enumerate(self.region.indices)}
        a = loc.get(as_point(self.N, x0).index(self.N))
        b = loc.get(as_point(self.N, x).index(self.N))
        if a is None or b is None:
            raise SiteOutsideRegion("site not in region")
        return float(self.values[a, b])


def green_matrix(N: int, A: PointSet) -> GreenMatrix:
    """All of G_A at once (dense inverse of I - P on ``A``)."""
    if len(A) > DIRECT_LIMIT:
        raise ValueError(f"dense Green matrix limited to {DIRECT_LIMIT} sites")
    if len(A) == N * N:
        raise SingularSystem("the walk never leaves the full torus")
    M = transition_operator(N, A).toarray()
    import scipy.linalg as la

    try:
        c = la.cho_factor(M, lower=True)
    except la.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    G = la.cho_solve(c, np.eye(len(A)))
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    return GreenMatrix(N=N, region=A, values=G)


def hitting_prob_exact(N: int, center, r: float, R: float, x0) -> float:
    """P_x0(walk hits bd D(center, r) before bd D(center, R))."""
    d = torus_distance(N, x0, center)
    if not (0 < r < d < R < N / 2):
        raise GeometryViolation(f"need 0 < r < d(x0, center) < R < N/2, got r={r}, d={d:.4f}, R={R}")
    inner = ball_boundary(N, center, r)
    outer = ball_boundary(N, center, R)
    if x0 in inner:
        return 1.0
    region = ball(N, center, R) - ball(N, center, r) - inner
    s = solver(N, region)
    nbr = neighbour_table(N)[region.indices]
    # rhs: one quarter for every neighbour lying on the inner boundary
    rhs = 0.25 * inner.mask.ravel()[nbr].sum(axis=1)
    if np.any(outer.mask.ravel()[nbr] & inner.mask.ravel()[nbr]):
        raise GeometryViolation("inner and outer boundaries touch")
    h = s.solve(rhs.astype(np.float64))
    return float(h[s.position(x0)])


def _disc_values(N: int, center, R: float, x0) -> tuple[float, float]:
    D = ball(N, center, R)
    s = solver(N, D)
    col = s.column(center)
    return float(col[s.position(x0)]), float(col[s.position(center)])


def kac_moment(N: int, center, R: float, x0, k: int) -> float:
    """E_x0[L(center)^k] before exiting D(center, R): k! G(x0,c) G(c,c)^(k-1)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    g0, gc = _disc_values(N, center, R, x0)
    return math.factorial(k) * g0 * gc ** (k - 1)


def laplace_excursion_transform(N: int, center, R: float, x0, beta: float) -> float:
    """E_x0[exp(-beta L(center) / G(c,c))] = 1 - (G(x0,c)/G(c,c)) beta/(1+beta)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    g0, gc = _disc_values(N, center, R, x0)
    return 1.0 - (g0 / gc) * beta / (1.0 + beta)


@dataclass(frozen=True)
class ResidualRow:
    R: float
    G_centered: float
    log_term: float
    residual: float
    d_off: float
    G_off: float
    log_off: float
    residual_off: float
    off_bound: float


@dataclass
class ResidualTable:
    N: int
    rows: list
    max_residual: float
    max_step: float
    off_constant: float
    passed: bool


def green_log_residual(N: int, R_list, center=(0, 0), limit: float = 2.0,
                       step_limit: float = 0.3, off_c2: float = 4.0) -> ResidualTable:
    """G_{D(x,R)}(x,x) - (2/pi) log R, plus the off-centre analogue at d = R/2.

    ``off_constant`` is the smallest c2 with
    |G(x0,x) - (2/pi) log(R/d)| <= c2 (1/d + 1/R) over the sweep.
    """
    rows = []
    for R in R_list:
        if R >= N / 2:
            raise ValueError(f"R={R} must be below N/2")
        c = as_point(N, center)
        x0 = (c.i + int(round(R / 2)), c.j)
        d = torus_distance(N, x0, c)
        g_off, g = _disc_values(N, c, R, x0)
        lg = 2 / math.pi * math.log(R)
        lo = 2 / math.pi * math.log(R / d)
        rows.append(ResidualRow(R=R, G_centered=g, log_term=lg, residual=g - lg,
                                d_off=d, G_off=g_off, log_off=lo, residual_off=g_off - lo,
                                off_bound=off_c2 * (1 / d + 1 / R)))
    res = [abs(r.residual) for r in rows]
    steps = [abs(b.residual - a.residual) for a, b in zip(rows, rows[1:])]
    off_c = max(abs(r.residual_off) / (1 / r.d_off + 1 / r.R) for r in rows)
    max_step = max(steps) if steps else 0.0
    passed = max(res) <= limit and max_step <= step_limit and off_c <= off_c2
    return ResidualTable(N=N, rows=rows, max_residual=max(res), max_step=max_step,
                         off_constant=off_c, passed=passed)


def hitting_bracket(r: float, R: float, d: float, c1: float = 2.0, c2: float = 2.0) -> tuple[float, float]:
    lr = math.log(R / r)
    return (math.log(R / d) - c1 / r) / lr, (math.log(R / d) + c2 / r) / lr
