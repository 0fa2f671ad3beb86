import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from loctime.kernels import BACKEND
from loctime.rng import WALK, replica_rng
from loctime.torus import ORIGIN, STEPS, PointSet, as_point, ball
from loctime.walker import (CoverTime, FixedTime, HitSet, InverseLocalTime, StepCapExceeded,
                            WalkConfig, cover_time_stats, cover_time_theory, inverse_local_time,
                            run_until, t_theta, tau_concentration_check)

compiled = pytest.mark.skipif(BACKEND != "compiled", reason="compiled extension not built")

sides = st.sampled_from([2, 3, 4, 8, 16])
seeds = st.integers(0, 2**32 - 1)


@st.composite
def stop_rules(draw, N):
    kind = draw(st.sampled_from(["fixed", "hit", "cover", "invlt"]))
    if kind == "fixed":
        return FixedTime(draw(st.floats(0.01, 2000)))
    if kind == "hit":
        k = draw(st.integers(1, min(4, N * N)))
        return HitSet(PointSet(N, draw(st.lists(st.integers(0, N * N - 1), min_size=k, max_size=k))))
    if kind == "cover":
        return CoverTime()
    return InverseLocalTime(draw(st.integers(0, N * N - 1)), draw(st.floats(0.01, 30)))


def test_t_theta_and_cover_formula():
    assert t_theta(64, 1.0) == pytest.approx(4 / math.pi * math.log(64) ** 2)
    assert cover_time_theory(64) == pytest.approx(64 * 64 * t_theta(64, 1.0))
    with pytest.raises(ValueError):
        t_theta(64, -1)


@given(st.data())
def test_conservation_and_bounds(data):
    N = data.draw(sides)
    stop = data.draw(stop_rules(N))
    cfg = WalkConfig(N=N, start=data.draw(st.integers(0, N * N - 1)), seed=data.draw(seeds))
    lt = run_until(cfg, stop)
    occ = lt.occupation
    assert np.all(occ >= 0)
    assert math.fsum(occ.ravel()) == pytest.approx(lt.elapsed, rel=1e-12, abs=1e-12)
    # a hit run ends on arrival, so the last site can be visited with zero occupation
    assert lt.visited_count >= np.count_nonzero(occ > 0)
    assert 1 <= lt.visited_count <= N * N
    if isinstance(stop, FixedTime):
        assert lt.elapsed == stop.horizon
    if isinstance(stop, CoverTime):
        assert lt.visited_count == N * N
        assert np.all(np.isfinite(lt.first_visit))
    if isinstance(stop, HitSet):
        assert lt.final in stop.target
    if isinstance(stop, InverseLocalTime):
        assert lt[stop.site] == stop.level
        assert lt.final == as_point(N, stop.site)


@given(st.integers(2, 12), seeds, st.floats(1, 500))
def test_first_visits_are_ordered_and_consistent(N, seed, horizon):
    lt = run_until(WalkConfig(N=N, seed=seed), FixedTime(horizon), record_path=True)
    fv = lt.first_visit.ravel()
    visited = np.isfinite(fv)
    assert fv[0] == 0.0
    assert visited.sum() == lt.visited_count
    assert np.all(fv[visited] <= horizon)
    # the path visits exactly the sites with a finite first-visit time
    assert set(np.unique(lt.path).tolist()) == set(np.flatnonzero(visited).tolist())


def test_path_is_a_nearest_neighbour_walk():
    lt = run_until(WalkConfig(N=9, seed=3), FixedTime(300.0), record_path=True)
    p = lt.path
    i, j = np.divmod(p, 9)
    di = (np.diff(i) + 1) % 9 - 1
    dj = (np.diff(j) + 1) % 9 - 1
    assert np.all(np.abs(di) + np.abs(dj) == 1)
    assert p[0] == 0 and p[-1] == lt.final.index(9)
    assert p.size == lt.skeleton_steps + 1


def test_fixed_time_reproduces_the_raw_stream():
    """A short run matches an independent reading of the first random chunk."""
    N, horizon = 7, 40.0
    lt = run_until(WalkConfig(N=N, start=(3, 3), seed=11), FixedTime(horizon))
    gen = replica_rng(11, 0, WALK)
    dirs = gen.integers(0, 4, 1024, dtype=np.uint8)
    holds = gen.standard_exponential(1024)
    occ = np.zeros((N, N))
    pos = np.array([3, 3])
    t = 0.0
    for d, h in zip(dirs, holds):
        if t + h >= horizon:
            occ[tuple(pos)] += horizon - t
            break
        occ[tuple(pos)] += h
        t += h
        pos = (pos + STEPS[d]) % N
    assert np.allclose(occ, lt.occupation, rtol=0, atol=1e-9)
    assert tuple(pos) == tuple(lt.final)


def test_hit_set_starting_inside_stops_immediately():
    lt = run_until(WalkConfig(N=8, start=(1, 1)), HitSet(PointSet.from_points(8, [(1, 1)])))
    assert lt.elapsed == 0 and lt.skeleton_steps == 0


def test_determinism_and_replica_independence():
    a = inverse_local_time(16, 5.0, seed=4, replica=0)
    b = inverse_local_time(16, 5.0, seed=4, replica=0)
    c = inverse_local_time(16, 5.0, seed=4, replica=1)
    assert np.array_equal(a.occupation, b.occupation)
    assert not np.array_equal(a.occupation, c.occupation)


def test_step_cap():
    with pytest.raises(StepCapExceeded):
        run_until(WalkConfig(N=64, max_steps=10), CoverTime())


def test_validation():
    with pytest.raises(ValueError):
        WalkConfig(N=1)
    with pytest.raises(ValueError):
        FixedTime(0)
    with pytest.raises(ValueError):
        InverseLocalTime(ORIGIN, 0)
    with pytest.raises(ValueError):
        HitSet(PointSet(4, []))
    with pytest.raises(ValueError):
        run_until(WalkConfig(N=4), HitSet(PointSet(5, [1])))


def test_inverse_local_time_mean_site_occupation():
    # E[L_{tau_t}(x)] = t at every site; pooled over sites and replicas
    N, t, R = 6, 4.0, 400
    occ = np.stack([inverse_local_time(N, t, seed=1, replica=r).occupation for r in range(R)])
    m = occ.reshape(R, -1)[:, 1:]
    z = (m.mean() - t) / (m.mean(axis=1).std(ddof=1) / math.sqrt(R))
    assert abs(z) < 4


def test_normalized():
    lt = inverse_local_time(8, 2.0, seed=0)
    z = lt.normalized(2.0)
    assert z[0, 0] == 0.0
    assert np.allclose(z, (lt.occupation - 2.0) / 2.0)


def test_single_site_exit_time():
    # From the origin, the expected time to leave a single site is one holding time.
    out = ball(8, ORIGIN, 1).complement()
    times = [run_until(WalkConfig(N=8, seed=2, replica=r), HitSet(out)).elapsed for r in range(4000)]
    assert np.mean(times) == pytest.approx(1.0, abs=4 * np.std(times) / math.sqrt(4000))


def test_cover_time_stats_small():
    cs = cover_time_stats(8, 30, seed=0)
    assert cs.samples.size == 30 and cs.mean > 0
    assert 0.3 < cs.ratio_to_theory < 3


def test_tau_concentration_report():
    rep = tau_concentration_check(8, 10.0, 40, seed=1)
    assert rep.passed and abs(rep.mean_z) < 4
    with pytest.raises(ValueError):
        tau_concentration_check(8, 10.0, 10)


@compiled
@given(st.data())
def test_backends_agree_bit_for_bit(data):
    N = data.draw(sides)
    stop = data.draw(stop_rules(N))
    cfg = WalkConfig(N=N, start=data.draw(st.integers(0, N * N - 1)), seed=data.draw(seeds),
                     replica=data.draw(st.integers(0, 5)))
    a = run_until(cfg, stop, backend="compiled", record_path=True)
    b = run_until(cfg, stop, backend="python", record_path=True)
    assert np.array_equal(a.occupation, b.occupation)
    assert a.elapsed == b.elapsed and a.final == b.final
    assert a.skeleton_steps == b.skeleton_steps and a.visited_count == b.visited_count
    assert np.array_equal(a.path, b.path)
    if a.first_visit is not None:
        assert np.array_equal(a.first_visit, b.first_visit)


def test_backend_override_by_environment():
    code = "import loctime.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, LOCTIME_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
