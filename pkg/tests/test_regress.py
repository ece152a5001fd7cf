import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorbt.regress import MIN_DOF, min_rows_for_window, ols, rolling_ols, rolling_ols_panel


def normal_equations(y, X):
    """Brute-force oracle: listwise deletion, then (A'A)^-1 A'y."""
    keep = np.isfinite(y) & np.isfinite(X).all(axis=1)
    A = np.column_stack([np.ones(keep.sum()), X[keep]])
    return np.linalg.solve(A.T @ A, A.T @ y[keep])


def test_exact_fit():
    x = np.arange(20.0)
    res = ols(2 * x, x)
    assert res.ok
    np.testing.assert_allclose(res.coefficients, [0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(res.residuals, 0.0, atol=1e-12)


def test_constant_response(rng):
    X = rng.standard_normal((30, 2))
    res = ols(np.full(30, 3.5), X)
    assert res.intercept == pytest.approx(3.5)
    np.testing.assert_allclose(res.coefficients[1:], 0.0, atol=1e-12)


def test_matches_normal_equations(rng):
    X = rng.standard_normal((50, 3))
    y = X @ [0.3, -1.0, 2.0] + 0.1 + rng.standard_normal(50)
    res = ols(y, X)
    np.testing.assert_allclose(res.coefficients, normal_equations(y, X), rtol=1e-8)


def test_residuals_orthogonal(rng):
    X = rng.standard_normal((40, 3)) * [1.0, 100.0, 0.01]
    y = rng.standard_normal(40)
    res = ols(y, X)
    A = np.column_stack([np.ones(40), X])
    scale = np.abs(A).max(axis=0) * np.abs(y).max()
    assert np.all(np.abs(A.T @ res.residuals) <= 1e-8 * 40 * scale)


def test_missing_rows_dropped(rng):
    X = rng.standard_normal((30, 2))
    y = rng.standard_normal(30)
    base = ols(y, X)
    Xm = np.vstack([X, [np.nan, np.nan]])
    ym = np.append(y, np.nan)
    res = ols(ym, Xm)
    np.testing.assert_array_equal(res.coefficients, base.coefficients)
    assert res.n_used == 30 and np.isnan(res.residuals[-1])


def test_too_few_rows_not_ok(rng):
    X = rng.standard_normal((MIN_DOF + 2, 2))
    assert not ols(rng.standard_normal(MIN_DOF + 2), X).ok
    assert ols(rng.standard_normal(MIN_DOF + 3), np.vstack([X, [[0.1, 0.2]]])).ok


def test_collinear_not_ok(rng):
    x = rng.standard_normal(30)
    res = ols(rng.standard_normal(30), np.column_stack([x, 2 * x]))
    assert not res.ok and np.isnan(res.coefficients).all()


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        ols(np.zeros(5), np.zeros((4, 2)))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 10**6))
def test_column_scaling(a, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 2))
    y = rng.standard_normal(25)
    base = ols(y, X)
    Xs = X.copy()
    Xs[:, 1] *= a
    res = ols(y, Xs)
    assert res.coefficients[2] == pytest.approx(base.coefficients[2] / a, rel=1e-8)
    np.testing.assert_allclose(res.residuals, base.residuals, atol=1e-10)


class TestRolling:
    def test_min_rows(self):
        assert min_rows_for_window(72, 4) == 54
        assert min_rows_for_window(12, 4) == 12

    def test_window_too_short(self, rng):
        with pytest.raises(ValueError):
            rolling_ols(rng.standard_normal(30), rng.standard_normal((30, 3)), window=10)

    def test_uses_strictly_prior_rows(self, rng):
        X = rng.standard_normal((60, 2))
        y = X @ [1.0, -1.0] + 0.1 * rng.standard_normal(60)
        fits = rolling_ols(y, X, window=20)
        for t in range(60):
            if t < 20:
                assert not fits[t].ok
                continue
            want = ols(y[t - 20 : t], X[t - 20 : t])
            np.testing.assert_allclose(fits[t].coefficients, want.coefficients, rtol=1e-9, atol=1e-12)

    def test_full_history_window(self, rng):
        X = rng.standard_normal((40, 1))
        y = rng.standard_normal(40)
        last = rolling_ols(y, X, window=39)[39]
        np.testing.assert_allclose(last.coefficients, ols(y[:39], X[:39]).coefficients, rtol=1e-9)

    def test_future_data_irrelevant(self, rng):
        X = rng.standard_normal((50, 2))
        Y = rng.standard_normal((50, 4))
        coef, ok, _ = rolling_ols_panel(Y, X, 24)
        X2, Y2 = X.copy(), Y.copy()
        X2[35:] = 99.0
        Y2[35:] = -7.0
        coef2, ok2, _ = rolling_ols_panel(Y2, X2, 24)
        assert np.array_equal(ok[:36], ok2[:36])
        assert np.array_equal(coef[:36], coef2[:36], equal_nan=True)

    def test_constant_coefficients_recovered(self, rng):
        X = rng.standard_normal((120, 2))
        y = 0.5 + X @ [1.5, -0.7] + 0.01 * rng.standard_normal(120)
        coef, ok, _ = rolling_ols_panel(y[:, None], X, 36)
        est = coef[ok[:, 0], 0]
        np.testing.assert_allclose(est, np.tile([0.5, 1.5, -0.7], (est.shape[0], 1)), atol=0.01)

    def test_sparse_window_not_ok(self, rng):
        X = rng.standard_normal((40, 1))
        y = rng.standard_normal(40)
        y[10:30:2] = np.nan  # 10 holes in a 20-month window leaves < 15
        coef, ok, n = rolling_ols_panel(y[:, None], X, 20)
        assert not ok[30, 0] and n[30, 0] == 10
