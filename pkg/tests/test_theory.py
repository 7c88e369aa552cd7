import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebransac.theory import (DiscreteDistribution, b_of_T, beta_of_T, brute_force_minimizer, discrete_ebr_loss,
                             h_beta, minimizer_distribution, project_to_simplex, simplex_grid, solve_t_cut)
from oracles import piecewise_t_cut

dists = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6).map(DiscreteDistribution.normalized)


def test_b_of_T_examples():
    q = DiscreteDistribution([0.25] * 4)
    assert b_of_T(q, 0.1) == pytest.approx(0.6, abs=1e-15)
    assert b_of_T(q, 0.0) == 1.0
    assert b_of_T(q, 0.25) == 0.0 and b_of_T(q, 0.9) == 0.0


@given(dists, st.floats(-0.5, 1.5))
@settings(max_examples=100, deadline=None)
def test_b_of_T_matches_direct_sum(q, T):
    assert b_of_T(q, T) == pytest.approx(np.maximum(q.probs - T, 0).sum(), abs=1e-14)


@given(dists)
@settings(max_examples=50, deadline=None)
def test_b_of_T_continuous_at_knots(q):
    for qk in q.probs:
        left, right = b_of_T(q, qk - 1e-12), b_of_T(q, qk + 1e-12)
        assert abs(left - right) <= q.K * 2.1e-12
        assert b_of_T(q, qk) == pytest.approx(np.maximum(q.probs - qk, 0).sum(), abs=1e-14)


def test_b_of_T_duplicates():
    q = DiscreteDistribution([0.3, 0.3, 0.2, 0.2])
    assert b_of_T(q, 0.25) == pytest.approx(0.1, abs=1e-15)
    assert b_of_T(q, 0.3) == 0.0


def test_t_cut_uniform_k2_beta0():
    sol = solve_t_cut([0.5, 0.5], 0.0)
    assert sol.t_cut == pytest.approx(1 / 3, abs=1e-12)
    np.testing.assert_allclose(sol.p.probs, [0.5, 0.5], atol=1e-15)
    assert sol.zeta == pytest.approx(sol.t_cut)


def test_t_cut_three_atoms_beta_minus_one():
    sol = solve_t_cut([0.7, 0.2, 0.1], -1.0)
    # closed form on the top piece: 0.7 / (1 + e^-1), mpmath 0.51174100504100341548
    assert sol.t_cut == pytest.approx(0.51174100504100341548, abs=1e-12)
    assert sol.t_cut == pytest.approx(piecewise_t_cut([0.7, 0.2, 0.1], -1.0), abs=1e-12)
    np.testing.assert_array_equal(sol.p.probs, [1.0, 0.0, 0.0])
    assert sol.zeta == pytest.approx(sol.t_cut / math.e)


def test_t_cut_explicit_tol():
    sol = solve_t_cut([0.6, 0.4], 0.5, tol=1e-4)
    assert sol.bracket[1] - sol.bracket[0] < 1e-4
    assert sol.t_cut == pytest.approx(piecewise_t_cut([0.6, 0.4], 0.5), abs=1e-4)
    with pytest.raises(ValueError):
        solve_t_cut([0.6, 0.4], 0.5, tol=0.0)


def test_t_cut_single_atom():
    sol = solve_t_cut([1.0], 2.0)
    assert sol.t_cut == pytest.approx(1 / (1 + math.exp(2.0)), abs=1e-12)
    np.testing.assert_array_equal(sol.p.probs, [1.0])


@given(dists, st.floats(-6, 6))
@settings(max_examples=150, deadline=None)
def test_t_cut_matches_piecewise_oracle(q, beta):
    sol = solve_t_cut(q, beta)
    assert sol.t_cut == pytest.approx(piecewise_t_cut(list(q.probs), beta), abs=2e-12 * q.t_star)
    assert 0 < sol.t_cut < q.t_star or q.K == 1
    # support rule, exactly
    np.testing.assert_array_equal(sol.p.probs > 0, q.probs > sol.t_cut)
    assert sol.p.probs.sum() == pytest.approx(1.0, abs=1e-14)
    slope = 1 + q.K * math.exp(-beta)
    assert abs(h_beta(q, beta, sol.t_cut)) <= slope * 1e-12 * q.t_star + 1e-15


def test_t_cut_large_beta_recovers_q(rng):
    for _ in range(20):
        q = DiscreteDistribution.normalized(rng.random(5) + 0.01)
        sol = solve_t_cut(q, 20.0)
        assert sol.t_cut <= math.exp(-20)
        assert 0.5 * np.abs(sol.p.probs - q.probs).sum() <= q.K * math.exp(-20)


def test_minimizer_localizes_for_negative_beta():
    p = minimizer_distribution([0.1, 0.45, 0.3, 0.15], -20.0)
    assert p.probs[1] == 1.0


def test_minimizer_support_via_beta_of_T():
    q = [0.5, 0.3, 0.2]
    beta = beta_of_T(q, 0.25)
    sol = solve_t_cut(q, beta)
    assert sol.t_cut == pytest.approx(0.25, abs=1e-12)
    assert list(sol.p.probs > 0) == [True, True, False]


def test_beta_of_T_examples():
    assert beta_of_T([0.5, 0.5], 1 / 3) == pytest.approx(0.0, abs=1e-14)
    q = [0.6, 0.3, 0.1]
    assert beta_of_T(q, 1e-9) > 20
    assert beta_of_T(q, 0.6 - 1e-9) < -15
    with pytest.raises(ValueError):
        beta_of_T(q, 0.6)
    with pytest.raises(ValueError):
        beta_of_T(q, 0.0)


@given(dists.filter(lambda q: q.K > 1), st.floats(-4, 4))
@settings(max_examples=50, deadline=None)
def test_round_trip_beta(q, beta):
    sol = solve_t_cut(q, beta)
    back = beta_of_T(q, sol.t_cut)
    # |d beta / dT| = |b'(T)/b(T) - 1/T| <= K/b + 1/T
    slope = q.K / b_of_T(q, sol.t_cut) + 1 / sol.t_cut
    assert abs(back - beta) <= slope * 2e-12 * q.t_star + 1e-12


@given(dists, st.floats(-5, 5), st.floats(0.05, 4.0))
@settings(max_examples=60, deadline=None)
def test_t_cut_decreases_in_beta(q, beta, gap):
    lo, hi = solve_t_cut(q, beta), solve_t_cut(q, beta + gap)
    assert lo.t_cut > hi.t_cut - 2e-12 * q.t_star


def test_discrete_loss_examples():
    assert discrete_ebr_loss([0.5, 0.5], [0.5, 0.5], 0.0) == pytest.approx(-0.40546510810816438198, abs=1e-15)
    assert discrete_ebr_loss([0.0, 1.0], [1.0, 0.0], 3.0) == 0.0


@given(dists, st.floats(-4, 4))
@settings(max_examples=60, deadline=None)
def test_minimizer_beats_ml_candidate(q, beta):
    p = minimizer_distribution(q, beta)
    assert discrete_ebr_loss(q, p, beta) <= discrete_ebr_loss(q, q, beta) + 1e-14


def test_simplex_grid_counts():
    g = simplex_grid(3, 4)
    assert g.shape == (math.comb(6, 2), 3)
    np.testing.assert_allclose(g.sum(axis=1), 1.0)
    assert len({tuple(r) for r in g}) == g.shape[0]


def test_projection_onto_simplex(rng):
    for _ in range(20):
        v = rng.normal(size=5)
        p = project_to_simplex(v)
        assert p.min() >= 0 and p.sum() == pytest.approx(1.0)
        # optimality: no other grid point closer
        for r in simplex_grid(5, 6):
            assert np.sum((v - p) ** 2) <= np.sum((v - r) ** 2) + 1e-12


def test_brute_force_examples():
    rho = brute_force_minimizer([0.5, 0.5], 0.0, 1000)
    np.testing.assert_allclose(rho.probs, [0.5, 0.5], atol=1e-3)
    assert list(brute_force_minimizer([1.0], 1.0, 10).probs) == [1.0]
    q = [0.7, 0.2, 0.1]
    bf = brute_force_minimizer(q, -1.0, 400)
    closed = minimizer_distribution(q, -1.0)
    assert discrete_ebr_loss(q, bf, -1.0) >= discrete_ebr_loss(q, closed, -1.0) - 1e-6
    with pytest.raises(ValueError):
        brute_force_minimizer(np.full(7, 1 / 7), 0.0, 5)


def test_brute_force_agrees_closely(rng):
    # The oracle is meaningful: it lands close to the closed form, not just above it.
    for K, res in [(2, 500), (3, 100), (4, 40)]:
        q = DiscreteDistribution.normalized(rng.random(K) + 0.05)
        for beta in (-1.0, 0.0, 2.0):
            gap = discrete_ebr_loss(q, brute_force_minimizer(q, beta, res), beta) - discrete_ebr_loss(
                q, minimizer_distribution(q, beta), beta)
            assert -1e-6 <= gap <= 1e-5
