import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confbeam.beamformer import (
    BeamformingSolution,
    PowerBudget,
    achievable_rate,
    inner_min_value,
    outage_indicator,
    solve_minmax,
    worst_case_channel,
)
from confbeam.numerics import DimensionMismatch, standard_complex_normal

from oracles import brute_force_inner_min, random_ball_points


def test_rate_examples():
    assert achievable_rate(np.zeros(3), np.ones(3), 1.0) == 0
    assert achievable_rate(np.array([1.0]), np.array([1.0]), 1.0) == pytest.approx(1.0)
    assert achievable_rate(np.array([1, 1j]), np.array([1j, 1]), 2.0) == pytest.approx(0.0, abs=1e-15)


def test_rate_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        achievable_rate(np.ones(2), np.ones(3), 1.0)


def test_inner_min_zero_radius(rng):
    h, w = standard_complex_normal(rng, (2, 5))
    assert inner_min_value(h, 0.0, w) == pytest.approx(np.abs(np.vdot(h, w)) ** 2, rel=1e-14)


def test_inner_min_ball_touching_origin(rng):
    h = standard_complex_normal(rng, 4)
    for w in standard_complex_normal(rng, (5, 4)):
        assert inner_min_value(h, np.linalg.norm(h), w) == 0
    assert inner_min_value(h, math.inf, h) == 0


def test_inner_min_clamps_misaligned_beam():
    h = np.array([1.0, 0.0])
    w = np.array([0.1, 1.0])
    assert inner_min_value(h, 0.5, w) == 0


@pytest.mark.parametrize("seed", range(4))
def test_inner_min_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    h = standard_complex_normal(rng, 4)
    q = 0.3 * np.linalg.norm(h)
    w = h + 0.3 * standard_complex_normal(rng, 4)  # aligned enough for a nonzero minimum
    closed = inner_min_value(h, q, w)
    assert closed > 0
    sampled, refined = brute_force_inner_min(rng, h, q, w)
    assert sampled >= closed * (1 - 1e-12)
    assert (refined - closed) / closed <= 1e-3
    h_star = worst_case_channel(h, q, w)
    assert np.linalg.norm(h_star - h) == pytest.approx(q, rel=1e-12)
    assert abs(np.abs(np.vdot(h_star, w)) ** 2 - closed) <= 1e-10 * max(closed, 1.0)


def test_worst_case_channel_reaching_zero(rng):
    h = np.array([1.0, 0.0], dtype=complex)
    w = np.array([0.2, 1.0j])
    h_star = worst_case_channel(h, 0.9, w)
    assert np.linalg.norm(h_star - h) <= 0.9
    assert abs(np.vdot(h_star, w)) <= 1e-12


def test_solve_no_uncertainty_is_mrt(rng):
    h = standard_complex_normal(rng, 6)
    budget = PowerBudget(2.0, 0.5)
    sol = solve_minmax(h, 0.0, budget)
    assert np.allclose(sol.w_star, np.sqrt(2) * h / np.linalg.norm(h))
    assert sol.guaranteed_rate == pytest.approx(np.log2(1 + 2 * np.linalg.norm(h) ** 2 / 0.5), rel=1e-12)


def test_solve_worked_example():
    h = np.array([2.0, 0.0])
    sol = solve_minmax(h, 1.0, PowerBudget(1.0, 1.0))
    assert sol.worst_case_gain == pytest.approx(1.0)
    assert sol.guaranteed_rate == pytest.approx(1.0)
    assert np.allclose(sol.h_star, [1.0, 0.0])


def test_solve_infinite_radius(rng):
    h = standard_complex_normal(rng, 3)
    sol = solve_minmax(h, math.inf, PowerBudget(4.0, 1.0))
    assert sol.guaranteed_rate == 0 and sol.worst_case_gain == 0
    assert np.array_equal(sol.h_star, np.zeros(3))
    assert np.allclose(sol.w_star, 2 * h / np.linalg.norm(h))
    assert not outage_indicator(sol, standard_complex_normal(rng, 3), 1.0)


def test_solve_zero_estimate():
    sol = solve_minmax(np.zeros(3), 0.5, PowerBudget(9.0, 1.0))
    assert np.allclose(sol.w_star, [3, 0, 0])
    assert sol.guaranteed_rate == 0


def test_solve_batch_matches_single(rng):
    H = standard_complex_normal(rng, (6, 4))
    q = np.array([0.1, 0.5, 5.0, math.inf, 0.0, 1.0])
    budget = PowerBudget(1.5, 0.3)
    batch = solve_minmax(H, q, budget)
    for i in range(6):
        single = solve_minmax(H[i], q[i], budget)
        assert np.allclose(batch.w_star[i], single.w_star)
        assert batch.guaranteed_rate[i] == pytest.approx(single.guaranteed_rate)


def test_outage_examples(rng):
    h = standard_complex_normal(rng, 4)
    sol = solve_minmax(h, 0.4 * np.linalg.norm(h), PowerBudget(1.0, 0.2))
    assert not outage_indicator(sol, sol.h_star, 0.2)
    inside = random_ball_points(rng, h, 0.4 * np.linalg.norm(h), 10_000)
    assert not np.any(outage_indicator(sol, inside, 0.2))
    zero_rate = BeamformingSolution(sol.w_star, np.zeros(4), 0.0, 0.0)
    assert not outage_indicator(zero_rate, np.zeros(4), 0.2)


instances = st.tuples(
    st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.0, 0.99), st.floats(0.1, 10.0), st.floats(0.01, 10.0)
)


@settings(max_examples=60, deadline=None)
@given(instances)
def test_solution_invariants(inst):
    n, seed, frac, power, noise = inst
    rng = np.random.default_rng(seed)
    h = standard_complex_normal(rng, n)
    q = frac * np.linalg.norm(h)
    budget = PowerBudget(power, noise)
    sol = solve_minmax(h, q, budget)
    assert np.linalg.norm(sol.w_star) ** 2 == pytest.approx(power, rel=1e-12)
    assert sol.guaranteed_rate == pytest.approx(np.log2(1 + sol.worst_case_gain / noise), abs=1e-12)
    assert abs(achievable_rate(sol.w_star, sol.h_star, noise) - sol.guaranteed_rate) <= 1e-12
    if q > 0:
        assert abs(np.linalg.norm(sol.h_star - h) - q) <= 1e-9 * max(1.0, q)
    inside = random_ball_points(rng, h, q, 2000)
    assert np.all(achievable_rate(sol.w_star, inside, noise) >= sol.guaranteed_rate - 1e-9)
    assert inner_min_value(h, q, sol.w_star) == pytest.approx(sol.worst_case_gain, rel=1e-10, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.1, 5.0))
def test_scale_equivariance(n, seed, c):
    rng = np.random.default_rng(seed)
    h = standard_complex_normal(rng, n)
    q = 0.4 * np.linalg.norm(h)
    budget = PowerBudget(1.0, 1.0)
    base, scaled = solve_minmax(h, q, budget), solve_minmax(c * h, c * q, budget)
    assert scaled.worst_case_gain == pytest.approx(c**2 * base.worst_case_gain, rel=1e-10)
    assert np.allclose(scaled.w_star, base.w_star, atol=1e-12)


def test_rate_strictly_decreasing_in_radius(rng):
    h = standard_complex_normal(rng, 5)
    norm = np.linalg.norm(h)
    qs = np.linspace(0, norm, 50, endpoint=False)
    rates = solve_minmax(np.tile(h, (50, 1)), qs, PowerBudget(1.0, 1.0)).guaranteed_rate
    assert np.all(np.diff(rates) < 0)
    assert solve_minmax(h, norm, PowerBudget()).guaranteed_rate == 0
    assert solve_minmax(h, 2 * norm, PowerBudget()).guaranteed_rate == 0


def test_budget_validation():
    with pytest.raises(ValueError):
        PowerBudget(0.0, 1.0)
    with pytest.raises(ValueError):
        solve_minmax(np.ones(2), -1.0, PowerBudget())
