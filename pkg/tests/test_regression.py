import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mavg_pricer.regression import InsufficientPaths, RegressionSpec, fit_local_basis


def test_spec_defaults_and_validation():
    spec = RegressionSpec((4, 1, 1))
    assert spec.dim == 3 and spec.n_cells == 4
    assert spec.min_points_per_cell == 8
    assert spec.min_paths == 32
    with pytest.raises(ValueError):
        RegressionSpec((2, 0))
    with pytest.raises(ValueError):
        RegressionSpec(())


def test_spec_for_state():
    assert RegressionSpec.for_state(4, 4, 1).cells_per_dim == (4, 1, 1, 1)
    assert RegressionSpec.for_state(3, 2, [3, 1]).cells_per_dim == (2, 3, 1)
    with pytest.raises(ValueError):
        RegressionSpec.for_state(3, 2, [3])


@pytest.mark.parametrize("cells", [(1,), (4,), (2, 2), (4, 1, 1)])
def test_constant_responses(cells):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(500, len(cells)))
    reg = fit_local_basis(X, np.full(500, 3.25), RegressionSpec(cells))
    np.testing.assert_allclose(reg.fitted, 3.25, atol=1e-12)
    np.testing.assert_allclose(reg.predict(rng.normal(size=(50, len(cells)))), 3.25, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_affine_responses_reproduced(d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(100, 10, size=(300, d))
    beta = rng.normal(size=d)
    y = 2.0 + X @ beta
    reg = fit_local_basis(X, y, RegressionSpec((1,) * d))
    np.testing.assert_allclose(reg.fitted, y, atol=1e-10 * np.abs(y).max())


def test_median_split_with_indicator():
    x = np.arange(1.0, 101.0)
    y = (x > 50).astype(float)
    reg = fit_local_basis(x, y, RegressionSpec((2,)))
    assert reg.thresholds[0][0, 0] == 51.0
    np.testing.assert_array_equal(reg.labels, (x > 50).astype(int))
    np.testing.assert_allclose(reg.fitted[:50], 0.0, atol=1e-12)
    np.testing.assert_allclose(reg.fitted[50:], 1.0, atol=1e-12)
    assert reg.predict([[10.0]])[0] == pytest.approx(0.0, abs=1e-12)
    assert reg.predict([[90.0]])[0] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 2**31), st.integers(0, 600))
def test_cells_partition_and_balance(cells, seed, extra):
    M = RegressionSpec(tuple(cells)).min_paths + extra
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(M, len(cells)))
    y = rng.normal(size=M)
    reg = fit_local_basis(X, y, RegressionSpec(tuple(cells)))
    counts = np.bincount(reg.labels, minlength=int(np.prod(cells)))
    assert counts.sum() == M
    assert counts.max() - counts.min() <= len(cells)
    np.testing.assert_array_equal(reg.cell_of(X), reg.labels)
    # per-cell least squares: residuals sum to zero in each cell
    resid = y - reg.fitted
    sums = np.bincount(reg.labels, weights=resid, minlength=len(counts))
    np.testing.assert_allclose(sums, 0.0, atol=1e-9)


def test_fit_is_deterministic():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(1000, 3))
    y = rng.normal(size=1000)
    a = fit_local_basis(X, y, RegressionSpec((4, 2, 1)))
    b = fit_local_basis(X, y, RegressionSpec((4, 2, 1)))
    assert np.array_equal(a.fitted, b.fitted)


def test_identical_points_fall_back_to_mean():
    X = np.ones((40, 2))
    y = np.arange(40.0)
    reg = fit_local_basis(X, y, RegressionSpec((2, 1)))
    assert reg.degenerate_cells == 2
    # ties are split by index, each cell gets the mean of its half
    np.testing.assert_allclose(reg.fitted[:20], np.mean(y[:20]))
    np.testing.assert_allclose(reg.fitted[20:], np.mean(y[20:]))


def test_collinear_coordinate_is_dropped():
    rng = np.random.default_rng(1)
    s = rng.normal(size=200)
    X = np.column_stack([s, 2 * s])
    y = 1 + 3 * s
    reg = fit_local_basis(X, y, RegressionSpec((1, 1)))
    assert reg.degenerate_cells == 1
    np.testing.assert_allclose(reg.fitted, y, atol=1e-10)


def test_heavy_ties_keep_balance():
    x = np.repeat([1.0, 2.0], [90, 10])
    reg = fit_local_basis(x, x.copy(), RegressionSpec((4,)))
    assert np.bincount(reg.labels).tolist() == [25, 25, 25, 25]


def test_insufficient_paths():
    with pytest.raises(InsufficientPaths):
        fit_local_basis(np.zeros((10, 2)), np.zeros(10), RegressionSpec((2, 2)))


def test_shape_checks():
    with pytest.raises(ValueError):
        fit_local_basis(np.zeros((50, 2)), np.zeros(50), RegressionSpec((2,)))
    with pytest.raises(ValueError):
        fit_local_basis(np.zeros((50, 1)), np.zeros(49), RegressionSpec((2,)))
