import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loctime.green import (GeometryViolation, SingularSystem, SiteOutsideRegion, green_exact,
                           green_log_residual, green_matrix, hitting_bracket, hitting_prob_exact,
                           kac_moment, laplace_excursion_transform, solver, transition_operator)
from loctime.torus import ORIGIN, PointSet, ball, ball_boundary
from loctime.walker import HitSet, WalkConfig, run_until

# Values from an independent dense oracle: I - P assembled by explicit loops
# over the four neighbours and inverted with numpy.linalg.inv.
FROZEN = [
    # (N, center, R, x0, G(x0, c), G(c, c))
    (32, (0, 0), 8, (0, 0), 2.3706994056569974, 2.3706994056569974),
    (16, (8, 8), 4, (10, 8), 0.4865269461077844, 1.9416167664670656),
    (20, (3, 4), 5.5, (5, 5), 0.6169065683285869, 2.1635528390214316),
]


@pytest.mark.parametrize("N,c,R,x0,g0,gc", FROZEN)
def test_green_matches_frozen_oracle(N, c, R, x0, g0, gc):
    D = ball(N, c, R)
    assert green_exact(N, D, x0, c) == pytest.approx(g0, rel=1e-10)
    assert green_exact(N, D, c, c) == pytest.approx(gc, rel=1e-10)
    assert green_matrix(N, D)(x0, c) == pytest.approx(g0, rel=1e-10)


def test_tiny_regions_in_closed_form():
    # one site: a single holding time
    assert green_exact(8, PointSet(8, [0]), 0, 0) == pytest.approx(1.0)
    # two adjacent sites: inverse of [[1, -1/4], [-1/4, 1]]
    A = PointSet.from_points(8, [(0, 0), (0, 1)])
    assert green_exact(8, A, (0, 0), (0, 0)) == pytest.approx(16 / 15)
    assert green_exact(8, A, (0, 0), (0, 1)) == pytest.approx(4 / 15)


def test_torus_minus_origin_rationals():
    rest = PointSet(4, range(1, 16))
    G = green_matrix(4, rest)
    assert G((2, 2), (2, 2)) == pytest.approx(8 / 3, rel=1e-12)
    assert G((1, 0), (1, 0)) == pytest.approx(15 / 8, rel=1e-12)
    assert G((1, 0), (0, 1)) == pytest.approx(17 / 24, rel=1e-12)


@given(st.integers(8, 30), st.floats(1.5, 3.9))
def test_green_is_symmetric_and_positive(N, R):
    G = green_matrix(N, ball(N, ORIGIN, R)).values
    assert np.allclose(G, G.T, atol=1e-12)
    assert np.all(G > 0)
    # the diagonal dominates each row: G(x, y) <= G(y, y)
    assert np.all(G <= np.diag(G)[None, :] + 1e-12)


@given(st.integers(8, 30), st.floats(1.5, 3.9))
def test_green_solves_the_killed_equation(N, R):
    D = ball(N, ORIGIN, R)
    M = transition_operator(N, D)
    G = green_matrix(N, D).values
    assert np.allclose(M @ G, np.eye(len(D)), atol=1e-10)


def test_iterative_solver_matches_direct(monkeypatch):
    import loctime.green as g

    D = ball(40, ORIGIN, 12)
    direct = green_exact(40, D, (3, 4), ORIGIN)
    monkeypatch.setattr(g, "DIRECT_LIMIT", 10)
    g._SOLVERS.clear()
    try:
        iterative = g._Solver(40, D).column(ORIGIN)[g._Solver(40, D).position((3, 4))]
    finally:
        g._SOLVERS.clear()
    assert iterative == pytest.approx(direct, rel=1e-8)


def test_errors():
    D = ball(16, ORIGIN, 3)
    with pytest.raises(SiteOutsideRegion):
        green_exact(16, D, (8, 8), ORIGIN)
    with pytest.raises(SingularSystem):
        solver(4, PointSet(4, range(16)))
    with pytest.raises(SingularSystem):
        green_matrix(4, PointSet(4, range(16)))
    with pytest.raises(GeometryViolation):
        hitting_prob_exact(64, ORIGIN, 4, 8, (20, 0))
    with pytest.raises(ValueError):
        kac_moment(16, ORIGIN, 3, ORIGIN, 0)
    with pytest.raises(ValueError):
        laplace_excursion_transform(16, ORIGIN, 3, ORIGIN, 0)


def test_kac_first_moment_is_green():
    assert kac_moment(16, (8, 8), 4, (10, 8), 1) == pytest.approx(0.4865269461077844, rel=1e-10)
    k3 = kac_moment(16, (8, 8), 4, (10, 8), 3)
    assert k3 == pytest.approx(6 * 0.4865269461077844 * 1.9416167664670656 ** 2, rel=1e-10)


@given(st.floats(0.01, 100))
def test_laplace_transform_limits(beta):
    v = laplace_excursion_transform(16, (8, 8), 4, (10, 8), beta)
    p_hit = 0.4865269461077844 / 1.9416167664670656
    assert 1 - p_hit <= v <= 1
    assert v == pytest.approx(1 - p_hit * beta / (1 + beta))


def _dense_hitting(N, c, r, R, x0):
    """Harmonic extension by a dense solve over the open annulus."""
    inner = ball_boundary(N, c, r)
    region = ball(N, c, R) - ball(N, c, r) - inner
    idx = {int(k): n for n, k in enumerate(region.indices)}
    M = np.eye(len(idx))
    b = np.zeros(len(idx))
    for k, n in idx.items():
        i, j = divmod(k, N)
        for a, d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            m = ((i + a) % N) * N + (j + d) % N
            if m in idx:
                M[n, idx[m]] -= 0.25
            elif m in inner:
                b[n] += 0.25
    h = np.linalg.solve(M, b)
    return h[idx[(x0[0] % N) * N + x0[1] % N]]


@pytest.mark.parametrize("r,R,d", [(2, 6, 3), (3, 9, 5), (2, 10, 7)])
def test_hitting_probability_matches_dense(r, R, d):
    N = 32
    p = hitting_prob_exact(N, ORIGIN, r, R, (d, 0))
    assert p == pytest.approx(_dense_hitting(N, ORIGIN, r, R, (d, 0)), rel=1e-10)
    assert 0 < p < 1


def test_hitting_probability_monte_carlo():
    N, r, R, x0 = 24, 2, 7, (4, 1)
    inner, outer = ball_boundary(N, ORIGIN, r), ball_boundary(N, ORIGIN, R)
    stop = HitSet(inner | outer)
    runs = 4000
    hits = sum(run_until(WalkConfig(N=N, start=x0, seed=5, replica=k), stop).final in inner
               for k in range(runs))
    p = hitting_prob_exact(N, ORIGIN, r, R, x0)
    assert abs(hits / runs - p) <= 4 * math.sqrt(p * (1 - p) / runs)


def test_hitting_probability_decreases_outward():
    ps = [hitting_prob_exact(128, ORIGIN, 4, 40, (d, 0)) for d in (6, 10, 20, 30, 38)]
    assert all(a > b for a, b in zip(ps, ps[1:]))


def test_bracket_formula():
    lo, hi = hitting_bracket(4, 64, 16)
    mid = math.log(4) / math.log(16)
    assert lo == pytest.approx(mid - 0.5 / math.log(16))
    assert hi == pytest.approx(mid + 0.5 / math.log(16))


def test_log_residual_small_torus():
    tab = green_log_residual(64, [4, 8, 16])
    assert tab.passed
    assert len(tab.rows) == 3
    with pytest.raises(ValueError):
        green_log_residual(16, [8])
