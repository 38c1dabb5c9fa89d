import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mavg_pricer.experiments import power_fit
from mavg_pricer.laguerre import LaguerreBasis, scaled_laguerre, uniform_density_coeffs
from mavg_pricer.weighting import (
    WeightingScheme,
    optimal_projection,
    optimize_scale,
    project,
    projection_error,
    survival_function,
)

import oracles

TABLE1 = [2.149, 4.072, 6.002, 4.234, 5.828, 7.473, 9.155, 10.866, 9.153, 10.726]


@st.composite
def schemes(draw):
    k0 = draw(st.floats(0.0, 0.6))
    pieces, start = [], 0.0
    for _ in range(draw(st.integers(1, 3))):
        start += draw(st.floats(0.0, 0.5))
        width = draw(st.floats(0.05, 1.0))
        pieces.append((start, start + width, draw(st.floats(0.1, 2.0))))
        start += width
    return WeightingScheme(k0, tuple(pieces))


def test_uniform_survival_values():
    s = WeightingScheme.uniform(2.0)
    assert s.survival(0.0) == 1.0
    assert s.survival(1.0) == pytest.approx(0.5)
    assert s.survival(2.0) == 0.0
    assert s.total_mass == 1.0


@given(st.floats(0.1, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_delayed_survival_flat_before_lag(window, lag, frac):
    s = WeightingScheme.delayed(window, lag)
    assert s.survival(frac * lag) == pytest.approx(1.0)


def test_delayed_survival_midpoint():
    assert WeightingScheme.delayed(1.0, 0.5).survival(1.0) == pytest.approx(0.5)


def test_survival_rejects_negative_argument():
    with pytest.raises(ValueError):
        survival_function(WeightingScheme.uniform(1.0), -0.1)


def test_point_mass_counts_only_at_zero():
    s = WeightingScheme(0.25, ((0.0, 1.0, 0.75),))
    assert s.survival(0.0) == pytest.approx(1.0)
    assert s.survival(1e-12) == pytest.approx(0.75)
    assert s.total_mass == pytest.approx(1.0)


@pytest.mark.parametrize("pieces", [((0.0, 1.0, 1.0), (0.5, 2.0, 1.0)), ((0.0, -1.0, 1.0),), ((0.0, 1.0, float("nan")),)])
def test_invalid_pieces(pieces):
    with pytest.raises(ValueError):
        WeightingScheme(0.0, pieces)


@pytest.mark.parametrize("window", [0.04, 1.0, 3.0])
def test_uniform_norm(window):
    assert WeightingScheme.uniform(window).survival_l2_norm_sq() == pytest.approx(window / 3, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(schemes())
def test_norm_matches_quadrature(scheme):
    ref, _ = integrate.quad(lambda x: scheme.survival(x) ** 2, 0, scheme.support_end,
                            points=scheme.breakpoints()[1:-1], limit=200)
    assert scheme.survival_l2_norm_sq() == pytest.approx(ref, rel=1e-10)


def test_density_coeffs_match_uniform_closed_form():
    proj = project(WeightingScheme.uniform(0.7), LaguerreBasis(3.3, 12))
    np.testing.assert_allclose(proj.c, uniform_density_coeffs(3.3, 0.7, 12), rtol=1e-12, atol=1e-14)


def test_survival_coefficients_match_quadrature():
    p = TABLE1[9]
    proj = project(WeightingScheme.uniform(1.0), LaguerreBasis(p, 10))
    for k in range(10):
        ref, _ = integrate.quad(lambda x: (1 - x) * scaled_laguerre(p, k, x), 0, 1, epsabs=1e-14, epsrel=1e-13)
        assert proj.A[k] == pytest.approx(ref, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(schemes(), st.floats(0.2, 30.0), st.integers(1, 12))
def test_coefficient_identities(scheme, p, n):
    proj = project(scheme, LaguerreBasis(p, n))
    A, c, a = proj.A, proj.c, proj.a
    root = math.sqrt(2 * p)
    for k in range(n):
        assert c[k] == pytest.approx(root * scheme.density_mass - 2 * p * A[:k].sum() - p * A[k], abs=1e-10)
        assert a[k] == pytest.approx(p * A[k] + 2 * p * A[k + 1:].sum(), abs=1e-10)
        assert a[k] == pytest.approx(c[k] - root * (proj.correction - scheme.point_mass_at_zero), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(schemes(), st.floats(0.2, 30.0), st.integers(1, 12))
def test_mass_preservation(scheme, p, n):
    proj = project(scheme, LaguerreBasis(p, n))
    assert proj.approx_mass == pytest.approx(scheme.total_mass, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(schemes(), st.floats(0.2, 30.0), st.integers(1, 12))
def test_bessel_inequality(scheme, p, n):
    proj = project(scheme, LaguerreBasis(p, n))
    assert float(np.dot(proj.A, proj.A)) <= scheme.survival_l2_norm_sq() * (1 + 1e-12)


def test_uniform_error_formula():
    proj = project(WeightingScheme.uniform(1.0), LaguerreBasis(3.0, 4))
    assert proj.l2_error**2 == pytest.approx(1 / 3 - np.sum(proj.A**2), rel=1e-12)


@pytest.mark.parametrize("n, expected", list(enumerate(TABLE1, start=1)))
def test_table1(n, expected):
    assert optimize_scale(WeightingScheme.uniform(1.0), n) == pytest.approx(expected, abs=0.01)


def test_scaling_law_example():
    assert optimize_scale(WeightingScheme.uniform(2.0), 3) == pytest.approx(3.001, abs=0.01)


@pytest.mark.parametrize("window", [0.04, 0.5])
@pytest.mark.parametrize("n", [1, 4, 7])
def test_scaling_law(window, n):
    p1 = optimize_scale(WeightingScheme.uniform(1.0), n)
    assert optimize_scale(WeightingScheme.uniform(window), n) * window == pytest.approx(p1, rel=1e-4)


def test_optimizer_is_global_on_scan():
    scheme = WeightingScheme.uniform(1.0)
    p = optimize_scale(scheme, 4)
    fine = np.linspace(0.5, 30.0, 3000)
    assert projection_error(scheme, p, 4) <= min(projection_error(scheme, q, 4) for q in fine) + 1e-9


def test_error_nonincreasing_at_fixed_scale():
    scheme = WeightingScheme.uniform(1.0)
    p = optimize_scale(scheme, 10)
    errs = [project(scheme, LaguerreBasis(p, n)).l2_error for n in range(1, 11)]
    assert all(b <= a + 1e-14 for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("lag", [0.0, 0.5])
def test_optimized_error_nonincreasing(lag):
    scheme = WeightingScheme.delayed(1.0, lag)
    errs = [optimal_projection(scheme, n).l2_error for n in range(1, 11)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_power_fit_exponent():
    scheme = WeightingScheme.uniform(1.0)
    ns = np.arange(1, 11)
    errs = [optimal_projection(scheme, n).l2_error for n in ns]
    assert power_fit(ns, errs) == pytest.approx(-1.06, abs=0.2)


@pytest.mark.parametrize("lag, n_ok", [(0.0, 3), (0.5, 5)])
def test_error_threshold_in_units_of_total_weight(lag, n_ok):
    scheme = WeightingScheme.delayed(1.0, lag)
    assert optimal_projection(scheme, n_ok).mass_relative_error < 0.05
    assert optimal_projection(scheme, n_ok - 1).mass_relative_error > 0.05


def test_norm_relative_error_values():
    # frozen values of ||H - H_n|| / ||H|| at the optimal scale
    assert optimal_projection(WeightingScheme.uniform(1.0), 3).relative_error == pytest.approx(0.0721, abs=5e-4)
    assert optimal_projection(WeightingScheme.delayed(1.0, 0.5), 5).relative_error == pytest.approx(0.0422, abs=5e-4)


@pytest.mark.parametrize("p", [1.0, 2.149, 4.0])
def test_survival_coefficient_decay_rate(p):
    proj = project(WeightingScheme.uniform(1.0), LaguerreBasis(p, 201))
    ks = np.arange(20, 201)
    assert oracles.loglog_slope(ks, proj.A[20:]) == pytest.approx(-1.25, abs=0.2)


def test_optimizer_needs_density():
    with pytest.raises(ValueError):
        optimize_scale(WeightingScheme(1.0, ()), 3)
