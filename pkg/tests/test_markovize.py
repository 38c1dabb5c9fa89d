import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from mavg_pricer.laguerre import LaguerreBasis
from mavg_pricer.market import GBMModel, TimeGrid, exact_moving_average, simulate_paths
from mavg_pricer.markovize import (
    StateTransition,
    assemble_approx_ma,
    generator_matrix,
    markovize,
    propagate_states,
    states_by_summation,
    transition_matrix,
    transition_matrix_series,
)
from mavg_pricer.weighting import WeightingScheme, optimal_projection, project

import oracles


def test_generator_structure():
    A = generator_matrix(LaguerreBasis(1.5, 4))
    np.testing.assert_array_equal(np.diag(A), 1.5)
    assert np.all(A[np.tril_indices(4, -1)] == 3.0)
    assert np.all(A[np.triu_indices(4, 1)] == 0.0)


@pytest.mark.parametrize("p, n, dt", [(2.0, 1, 0.1), (50.0, 7, 0.004), (230.0, 10, 0.004), (5.0, 15, 0.3)])
def test_transition_matrix_three_ways(p, n, dt):
    basis = LaguerreBasis(p, n)
    E = transition_matrix(basis, dt)
    np.testing.assert_allclose(E, expm(-generator_matrix(basis) * dt), atol=1e-13)
    np.testing.assert_allclose(E, transition_matrix_series(basis, dt), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 300.0), st.integers(1, 12), st.floats(1e-4, 0.5))
def test_constant_price_is_a_fixed_point(p, n, dt):
    trans = StateTransition.build(LaguerreBasis(p, n), dt)
    v = trans.fixed_point
    np.testing.assert_allclose(trans.E @ v + trans.w, v, rtol=1e-12, atol=1e-12 * np.abs(v).max())


def test_initial_states():
    basis = LaguerreBasis(3.0, 5)
    grid = TimeGrid(N=10, N_delta=5)
    prices = simulate_paths(GBMModel(), grid, 4, seed=1).prices
    states = propagate_states(prices, basis, grid)
    expected = 100.0 * (-1.0) ** np.arange(5) * math.sqrt(6.0) / 3.0
    np.testing.assert_allclose(states[:, 0], np.broadcast_to(expected, (4, 5)), rtol=1e-15)


@pytest.mark.parametrize("lag", [0.0, 0.02])
def test_constant_path_is_stationary_and_exact(lag):
    grid = TimeGrid(N=50, N_delta=5, N_lag=round(lag / 0.004))
    proj = optimal_projection(WeightingScheme.delayed(grid.delta, grid.lag), 4)
    prices = np.full((3, grid.N + 1), 100.0)
    states = propagate_states(prices, proj, grid)
    np.testing.assert_allclose(states, np.broadcast_to(100.0 * proj.basis.initial_state, states.shape), rtol=1e-12)
    approx = assemble_approx_ma(states, prices, proj)
    np.testing.assert_allclose(approx, 100.0, rtol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_recursion_matches_summation(n):
    grid = TimeGrid(T=0.2, N=10, N_delta=8)
    basis = optimal_projection(WeightingScheme.uniform(grid.delta), n).basis
    prices = simulate_paths(GBMModel(), grid, 25, seed=n).prices
    rec = propagate_states(prices, basis, grid)
    ref = states_by_summation(prices, basis, grid.dt)
    assert np.max(np.abs(rec - ref)) <= 1e-10 * np.max(np.abs(ref))


@pytest.mark.parametrize("n", [1, 3, 7])
def test_recursion_matches_fine_ode(n):
    grid = TimeGrid(T=0.2, N=10, N_delta=8)
    basis = optimal_projection(WeightingScheme.uniform(grid.delta), n).basis
    prices = simulate_paths(GBMModel(), grid, 2, seed=10 + n).prices
    rec = propagate_states(prices, basis, grid)
    for m in range(prices.shape[0]):
        ode = oracles.midpoint_ode_states(prices[m], basis.p, n, grid.dt, substeps=1000)
        assert np.max(np.abs(rec[m] - ode)) <= 1e-6 * np.max(np.abs(ode))


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31), st.integers(1, 8))
def test_propagation_is_linear(alpha, beta, seed, n):
    grid = TimeGrid(T=0.2, N=20, N_delta=10)
    basis = LaguerreBasis(60.0, n)
    rng = np.random.default_rng(seed)
    s1, s2 = rng.uniform(50, 150, (2, 3, grid.N + 1))
    lhs = propagate_states(alpha * s1 + beta * s2, basis, grid)
    rhs = alpha * propagate_states(s1, basis, grid) + beta * propagate_states(s2, basis, grid)
    scale = max(1.0, np.abs(lhs).max())
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_markovize_wrapper():
    grid = TimeGrid(N=50, N_delta=10)
    paths = simulate_paths(GBMModel(), grid, 10, seed=2)
    proj = project(WeightingScheme.uniform(grid.delta), LaguerreBasis(150.0, 3))
    out = markovize(paths, proj)
    assert out.states.shape == (10, 51, 3)
    np.testing.assert_allclose(out.approx_ma, proj.correction * paths.prices + out.states @ proj.a)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        propagate_states(np.ones((2, 7)), LaguerreBasis(1.0, 2), TimeGrid(N=10, N_delta=2))


def _mean_sup_errors(ns, M=1000):
    grid = TimeGrid(T=0.2, N=50, N_delta=10)
    paths = simulate_paths(GBMModel(), grid, M, seed=3)
    exact = exact_moving_average(paths, grid)
    out = []
    for n in ns:
        proj = optimal_projection(WeightingScheme.uniform(grid.delta), n)
        approx = assemble_approx_ma(propagate_states(paths, proj, grid), paths, proj)
        out.append(float(np.abs(approx - exact).max(axis=1).mean()))
    return out


def test_sup_error_decreases_with_order():
    e1, e3, e7 = _mean_sup_errors([1, 3, 7])
    assert e1 > e3 > e7


def test_sup_error_rate_is_negative():
    ns = np.arange(1, 11)
    errs = _mean_sup_errors(ns)
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    assert oracles.loglog_slope(ns, errs) < 0
