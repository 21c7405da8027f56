import numpy as np
import pytest

from labor import erdos_renyi, power_law, shared_star
from labor.solver import (
    DomainError,
    cs_iterates,
    expected_sample_size,
    gather_neighborhood,
    labor_fixed_point,
    marginal_variance_derivative,
    neediest_seed,
    ns_variance_target,
    objective,
    solve_cs,
    solve_cs_batch,
    weighted_solve_cs,
    weighted_variance_slope,
)
from oracles import bisection_cs


# --- scalar c_s solve


def test_uniform_closed_form():
    r = solve_cs(np.ones(20), 10)
    assert r.c == pytest.approx(0.5, rel=1e-15)
    assert not r.saturated


def test_two_entry_example():
    # 1 + 1/min(1, c/4) = 4 on the c > 1 branch
    assert solve_cs([1.0, 0.25], 1).c == pytest.approx(4.0 / 3.0, rel=1e-14)
    assert bisection_cs([1.0, 0.25], 4.0) == pytest.approx(4.0 / 3.0, rel=1e-10)


def test_frozen_mixed_row():
    # hand solve: 1 + (5 + 2 + 1/0.7)/c = 8
    assert solve_cs([0.2, 0.5, 1.0, 0.7], 2).c == pytest.approx(59.0 / 49.0, rel=1e-14)


def test_saturation_branch():
    r = solve_cs([0.5, 1.0, 0.2], 10)
    assert r.c == 5.0 and r.saturated


def test_degree_equal_fanout_saturates():
    r = solve_cs([0.5, 0.25], 2)
    assert r.c == 4.0 and r.saturated


def test_solver_domain_errors():
    with pytest.raises(DomainError):
        solve_cs([0.5, 0.0], 1)
    with pytest.raises(DomainError):
        solve_cs([0.5, -1.0], 1)
    with pytest.raises(DomainError):
        solve_cs([], 1)
    with pytest.raises(ValueError):
        solve_cs([1.0], 0)


def test_random_instances_against_bisection():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 60))
        k = int(rng.integers(1, d))
        pi = rng.uniform(0.01, 1.0, d) ** rng.uniform(0.5, 3.0)
        r = solve_cs(pi, k)
        ref = bisection_cs(pi, d * d / k)
        worst = max(worst, abs(r.c - ref) / ref)
        assert r.iterations <= d
        lhs = np.sum(1.0 / np.minimum(1.0, r.c * pi))
        assert abs(lhs - d * d / k) <= 1e-9 * d * d / k
    assert worst < 1e-8


def test_iterates_monotone_from_below():
    rng = np.random.default_rng(5)
    for _ in range(200):
        d = int(rng.integers(2, 40))
        k = int(rng.integers(1, d))
        pi = rng.uniform(0.01, 1.0, d)
        seq = cs_iterates(pi, d * d / k)
        assert all(b >= a for a, b in zip(seq, seq[1:]))
        assert seq[-1] == pytest.approx(solve_cs(pi, k).c, rel=1e-12)
        assert len(seq) - 1 <= d + 1


def test_ns_variance_target():
    assert ns_variance_target(10, 5) == pytest.approx(0.1)
    assert ns_variance_target(3, 5) == 0.0


# --- weighted solve


def test_weighted_reduces_to_uniform():
    r = weighted_solve_cs(np.full(20, 3.0), np.full(20, 0.7), k=10)
    assert r.c * 0.7 == pytest.approx(0.5, rel=1e-12)


def test_weighted_example():
    r = weighted_solve_cs([2.0, 1.0], [1.0, 1.0], a_star=3.0, v_s=0.1)
    assert r.c == pytest.approx(5.0 / 5.9, rel=1e-12)
    assert r.c == pytest.approx(bisection_cs([1.0, 1.0], 0.1 * 9 + 5, w2=[4.0, 1.0]), rel=1e-10)


def test_weighted_zero_target_saturates():
    r = weighted_solve_cs([2.0, 1.0], [0.5, 0.25], v_s=0.0)
    assert r.c == 4.0 and r.saturated


def test_weighted_single_edge():
    r = weighted_solve_cs([3.0], [0.25], k=1)
    assert r.c == 4.0 and r.saturated


def test_weighted_random_against_bisection():
    rng = np.random.default_rng(8)
    for _ in range(300):
        d = int(rng.integers(2, 30))
        a = rng.uniform(0.1, 5.0, d)
        pi = rng.uniform(0.05, 1.0, d)
        v = float(rng.uniform(0.001, 1.0))
        r = weighted_solve_cs(a, pi, v_s=v)
        ref = bisection_cs(pi, v * a.sum() ** 2 + np.sum(a * a), w2=a * a)
        assert r.c == pytest.approx(ref, rel=1e-8)
        assert r.iterations <= d


def test_weighted_domain_errors():
    with pytest.raises(DomainError):
        weighted_solve_cs([1.0, -1.0], [1.0, 1.0], v_s=0.1)
    with pytest.raises(DomainError):
        weighted_solve_cs([1.0, 1.0], [1.0, 1.0], v_s=-0.1)
    with pytest.raises(ValueError):
        weighted_solve_cs([1.0], [1.0])


# --- batched solves and the fixed point


def test_batch_matches_scalar(er50):
    nb = gather_neighborhood(er50, np.arange(16))
    pi = np.random.default_rng(0).uniform(0.1, 1.0, nb.num_edges)
    cs = solve_cs_batch(nb, pi, 5)
    for j in range(16):
        lo, hi = nb.seg_ptr[j], nb.seg_ptr[j + 1]
        assert cs.c[j] == pytest.approx(solve_cs(pi[lo:hi], 5).c, rel=1e-13)


def test_zero_degree_seed_gets_nan():
    from labor import from_edges

    g = from_edges([1], [0], 3)
    nb = gather_neighborhood(g, [0, 2])
    cs = solve_cs_batch(nb, np.ones(nb.num_edges), 1)
    assert cs.c[0] == 1.0 and np.isnan(cs.c[1])


def test_fixed_point_zero_rounds_is_uniform(er50):
    fp = labor_fixed_point(er50, np.arange(16), k=5, iterations=0)
    assert fp.rounds == 0
    assert np.all(fp.pi.values == 1.0)
    deg = gather_neighborhood(er50, np.arange(16)).degrees
    np.testing.assert_allclose(fp.cs.c, np.where(deg > 5, 5 / deg, 1.0), rtol=1e-14)


def test_fixed_point_shared_star_one_round():
    fp = labor_fixed_point(shared_star(2, 20), [0, 1], k=10, iterations=1)
    np.testing.assert_allclose(fp.pi.values, 0.5, rtol=1e-14)
    np.testing.assert_allclose(fp.cs.c, 1.0, rtol=1e-14)
    np.testing.assert_allclose(np.minimum(1, fp.cs.c[0] * fp.pi.values), 0.5)


def test_expected_size_shared_star():
    g = shared_star(2, 20)
    fp = labor_fixed_point(g, [0, 1], k=10)
    nb = gather_neighborhood(g, [0, 1])
    res = expected_sample_size(nb, fp.pi_edge, fp.cs)
    assert res.total == 10.0
    np.testing.assert_allclose(res.per_seed, [10.0, 10.0])


def test_expected_size_saturation(er50):
    nb = gather_neighborhood(er50, np.arange(5))
    fp = labor_fixed_point(nb, k=100)
    assert expected_sample_size(nb, fp.pi_edge, fp.cs).total == nb.num_candidates


@pytest.mark.parametrize("x", [0.5, 2.0, 10.0])
def test_objective_homogeneous_degree_zero(er50, x):
    nb = gather_neighborhood(er50, np.arange(16))
    pi = np.random.default_rng(3).uniform(0.05, 1.0, nb.num_candidates)[nb.cand_index]
    base = objective(nb, pi, solve_cs_batch(nb, pi, 5))
    scaled = objective(nb, x * pi, solve_cs_batch(nb, x * pi, 5))
    assert scaled == pytest.approx(base, rel=1e-9)


def _random_instance(i):
    rng = np.random.default_rng(1000 + i)
    if i % 2:
        g = power_law(300, 2.1, float(rng.uniform(4, 12)), seed=i)
    else:
        g = erdos_renyi(200, float(rng.uniform(0.02, 0.1)), seed=i)
    seeds = rng.choice(g.num_vertices, size=int(rng.integers(5, 40)), replace=False)
    k = int(rng.integers(2, 12))
    return g, seeds, k


def test_fixed_point_properties_small():
    for i in range(20):
        g, seeds, k = _random_instance(i)
        fp = labor_fixed_point(g, seeds, k=k, iterations=6)
        tr = fp.objective_trace
        assert all(b <= a * (1 + 1e-12) for a, b in zip(tr, tr[1:]))
        assert np.nanmax(fp.cs.c) <= 1.0 + 1e-12


def test_pi_nonincreasing_after_first_round():
    g, seeds, k = _random_instance(3)
    prev = None
    for it in range(1, 6):
        fp = labor_fixed_point(g, seeds, k=k, iterations=it)
        if prev is not None:
            assert np.all(fp.pi.values <= prev * (1 + 1e-12))
        prev = fp.pi.values


def test_converge_policy_and_final_c_consistent(er50):
    fp = labor_fixed_point(er50, np.arange(16), k=5, iterations="CONVERGE")
    assert 1 <= fp.rounds <= 100
    nb = gather_neighborhood(er50, np.arange(16))
    again = solve_cs_batch(nb, fp.pi_edge, 5)
    np.testing.assert_array_equal(again.c, fp.cs.c)


def test_bad_iteration_policy(er50):
    with pytest.raises(ValueError):
        labor_fixed_point(er50, [0], k=5, iterations=-1)


def test_weighted_fixed_point_equal_weights_match_unweighted():
    from labor import Graph

    g = erdos_renyi(60, 0.15, seed=4)
    gw = Graph(g.num_vertices, g.in_indptr, g.in_indices, np.full(g.num_edges, 2.0))
    seeds = np.arange(10)
    for it in (0, 2):
        a = labor_fixed_point(g, seeds, k=4, iterations=it)
        b = labor_fixed_point(gw, seeds, k=4, iterations=it, weighted=True)
        pa = np.minimum(1, a.cs.c[gather_neighborhood(g, seeds).seg_of] * a.pi_edge)
        pb = np.minimum(1, b.cs.c[gather_neighborhood(gw, seeds, True).seg_of] * b.pi_edge)
        np.testing.assert_allclose(pa, pb, rtol=1e-12)


def test_weighted_fixed_point_objective_decreases():
    from labor import Graph

    g = power_law(300, 2.1, 8, seed=2)
    w = np.random.default_rng(0).uniform(0.2, 3.0, g.num_edges)
    gw = Graph(g.num_vertices, g.in_indptr, g.in_indices, w)
    fp = labor_fixed_point(gw, np.arange(30), k=5, iterations=8, weighted=True)
    tr = fp.objective_trace
    assert all(b <= a * (1 + 1e-12) for a, b in zip(tr, tr[1:]))
    assert np.nanmax(fp.cs.c) <= 1 + 1e-12


# --- diagnostics


def test_marginal_derivative():
    assert marginal_variance_derivative(1) == -1.0
    assert marginal_variance_derivative(10) == pytest.approx(-0.01)
    with pytest.raises(DomainError):
        marginal_variance_derivative(0)


def test_neediest_seed():
    assert neediest_seed([3, 7, 2]) == 2
    with pytest.raises(DomainError):
        neediest_seed([3, 0])


def test_weighted_variance_slope_negative():
    assert weighted_variance_slope([1.0, 2.0, 3.0], [0.5, 0.5, 0.5], 0.8) < 0
