import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetrisk.errors import (
    DimensionMismatch,
    InfeasibleBounds,
    RankDeficientLoadings,
    ZeroAlpha,
)
from hetrisk.optimizer import (
    optimize_bounded,
    optimize_unbounded,
    regression_as_optimization_check,
    regression_holdings,
    weighted_regression_residuals,
)
from oracles import kkt_dollar_neutral, normal_equations_residuals, qp_enumerate


def spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T / n + np.diag(rng.uniform(0.5, 1.5, n))


def industry_matrix(groups):
    groups = np.asarray(groups)
    out = np.zeros((groups.size, groups.max() + 1))
    out[np.arange(groups.size), groups] = 1.0
    return out


def test_intercept_only_regression_demeans():
    e = np.array([0.01, -0.02, 0.03, 0.0])
    res = weighted_regression_residuals(e, np.ones(4), np.ones(4))
    np.testing.assert_allclose(res.raw, e - e.mean(), atol=1e-16)
    h = regression_holdings(e, np.ones(4), np.ones(4), investment=100.0)
    np.testing.assert_allclose(h.weights, -(e - e.mean()) / np.abs(e - e.mean()).sum())
    assert h.holdings.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.abs(h.holdings).sum() == pytest.approx(100.0)


def test_residuals_match_normal_equations(rng):
    n = 30
    e = rng.standard_normal(n) * 0.01
    y = np.column_stack([np.ones(n), rng.standard_normal((n, 3))])
    z = rng.uniform(0.5, 3.0, n)
    res = weighted_regression_residuals(e, y, z)
    np.testing.assert_allclose(res.raw, normal_equations_residuals(e, y, z), atol=1e-15)
    np.testing.assert_allclose(y.T @ res.weighted, 0.0, atol=1e-15)


def test_lone_indicator_rows_are_exactly_zero(rng):
    e = rng.standard_normal(7)
    y = industry_matrix([0, 0, 1, 2, 2, 2, 3])
    res = weighted_regression_residuals(e, y, np.ones(7))
    assert res.raw[2] == 0.0 and res.raw[6] == 0.0
    w = optimize_bounded(e, y, np.ones(7), 0.3, -0.3).weights
    assert w[2] == 0.0 and w[6] == 0.0


def test_regression_weight_scaling_invariance(rng):
    e = rng.standard_normal(12)
    y = np.column_stack([np.ones(12), rng.standard_normal(12)])
    z = rng.uniform(0.1, 1.0, 12)
    a = regression_holdings(e, y, z).weights
    np.testing.assert_allclose(regression_holdings(e, y, 7.5 * z).weights, a, atol=1e-14)
    np.testing.assert_allclose(regression_holdings(3.0 * e, y, z).weights, a, atol=1e-14)


def test_regression_errors(rng):
    e = rng.standard_normal(5)
    with pytest.raises(RankDeficientLoadings):
        regression_holdings(e, np.zeros((5, 0)), np.ones(5))
    with pytest.raises(RankDeficientLoadings):
        regression_holdings(e, np.ones((5, 5)), np.ones(5))
    with pytest.raises(RankDeficientLoadings):
        regression_holdings(e, np.column_stack([np.ones(5), 2 * np.ones(5)]), np.ones(5))
    with pytest.raises(DimensionMismatch):
        regression_holdings(e, np.ones(4), np.ones(5))
    with pytest.raises(ValueError):
        regression_holdings(e, np.ones(5), -np.ones(5))
    with pytest.raises(ZeroAlpha):
        regression_holdings(np.full(5, 0.3), np.ones(5), np.ones(5))


def test_identity_covariance_example():
    e = np.array([0.02, -0.01, 0.0, 0.03])
    w = optimize_unbounded(e, np.eye(4)).weights
    d = e - e.mean()
    np.testing.assert_allclose(w, -d / np.abs(d).sum(), atol=1e-15)


def test_unbounded_matches_kkt(rng):
    n = 9
    gamma = spd(rng, n)
    e = rng.standard_normal(n)
    w = optimize_unbounded(e, np.linalg.inv(gamma), investment=5.0)
    np.testing.assert_allclose(w.weights, kkt_dollar_neutral(e, gamma), atol=1e-12)
    assert w.holdings.sum() == pytest.approx(0.0, abs=1e-12)


def test_unbounded_accepts_diagonal_and_checks_shape(rng):
    e = rng.standard_normal(5)
    z = rng.uniform(1, 2, 5)
    np.testing.assert_allclose(optimize_unbounded(e, z).weights,
                               optimize_unbounded(e, np.diag(z)).weights, atol=1e-15)
    with pytest.raises(DimensionMismatch):
        optimize_unbounded(e, np.eye(4))
    with pytest.raises(ZeroAlpha):
        optimize_unbounded(np.ones(5), np.eye(5))


def test_wide_bounds_reproduce_unbounded(rng):
    n = 10
    s = np.linalg.inv(spd(rng, n))
    e = rng.standard_normal(n)
    bounded = optimize_bounded(e, np.ones(n), s, np.inf, -np.inf)
    np.testing.assert_allclose(bounded.weights, optimize_unbounded(e, s).weights, atol=1e-9)
    assert bounded.diagnostics["outer_iterations"] == 1


@pytest.mark.parametrize("seed", range(8))
def test_bounded_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 6
    gamma = spd(rng, n)
    e = rng.standard_normal(n)
    y = np.column_stack([np.ones(n), rng.standard_normal(n)])
    upper = rng.uniform(0.12, 0.4, n)
    lower = -rng.uniform(0.12, 0.4, n)
    res = optimize_bounded(e, y, np.linalg.inv(gamma), upper, lower, prec=1e-10)
    lin = res.diagnostics["alpha_scale"] * e
    oracle = qp_enumerate(lin, y, gamma, upper, lower)
    np.testing.assert_allclose(res.weights, oracle, atol=1e-8)
    assert np.abs(res.weights).sum() == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(y.T @ res.weights, 0.0, atol=1e-12)
    assert np.all(res.weights <= upper + 1e-12) and np.all(res.weights >= lower - 1e-12)


def test_reference_method_agrees_for_diagonal(rng):
    n = 15
    e = rng.standard_normal(n)
    z = rng.uniform(0.5, 2.0, n)
    a = optimize_bounded(e, np.ones(n), z, 0.1, -0.1, prec=1e-9)
    b = optimize_bounded(e, np.ones(n), z, 0.1, -0.1, prec=1e-9, method="reference")
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-7)
    assert b.diagnostics["method"] == "reference"
    with pytest.raises(ValueError):
        optimize_bounded(e, np.ones(n), z, 0.1, -0.1, method="bogus")


def test_bounded_errors(rng):
    e = rng.standard_normal(5)
    with pytest.raises(InfeasibleBounds):
        optimize_bounded(e, np.ones(5), np.ones(5), 0.1, -0.1)
    with pytest.raises(InfeasibleBounds):
        optimize_bounded(e, np.ones(5), np.ones(5), 0.5, 0.1)
    with pytest.raises(ZeroAlpha):
        optimize_bounded(np.ones(5), np.ones(5), np.ones(5), 1.0, -1.0)
    with pytest.raises(RankDeficientLoadings):
        optimize_bounded(e, np.zeros((5, 0)), np.ones(5), 1.0, -1.0)


def test_saturated_constraints_are_infeasible():
    # long names can only reach 0.1 in total, so sum(w) = 0 caps the gross at 0.2
    e = np.array([-1.0, -1.0, 1.0, 1.0])
    upper = np.array([0.05, 0.05, 1.0, 1.0])
    with pytest.raises(InfeasibleBounds, match="saturates") as info:
        optimize_bounded(e, np.ones(4), np.ones(4), upper, -1.0)
    assert info.value.gross_cap == pytest.approx(0.2, abs=1e-9)


def test_box_reach_below_one_is_infeasible():
    with pytest.raises(InfeasibleBounds) as info:
        optimize_bounded(np.arange(5.0), np.ones(5), np.ones(5), 0.1, -0.1)
    assert info.value.gross_cap == pytest.approx(0.5)


def test_equivalence_check(rng):
    n = 20
    e = rng.standard_normal(n)
    y = np.column_stack([np.ones(n), industry_matrix(np.arange(n) % 4)[:, 1:]])
    check = regression_as_optimization_check(e, y, rng.uniform(0.5, 2.0, n))
    assert check.max_abs_diff < 1e-12
    with pytest.raises(ValueError):
        regression_as_optimization_check(e, y, np.zeros(n))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(4, 25), c=st.floats(0.01, 100.0), seed=st.integers(0, 2**31 - 1))
def test_bounded_homogeneity(n, c, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    s = np.linalg.inv(spd(rng, n))
    bound = 2.5 / n
    base = optimize_bounded(e, np.ones(n), s, bound, -bound, prec=1e-10).weights
    scaled_alpha = optimize_bounded(c * e, np.ones(n), s, bound, -bound, prec=1e-10).weights
    scaled_cov = optimize_bounded(e, np.ones(n), c * s, bound, -bound, prec=1e-10).weights
    np.testing.assert_allclose(scaled_alpha, base, atol=1e-7)
    np.testing.assert_allclose(scaled_cov, base, atol=1e-7)
    assert abs(np.abs(base).sum() - 1) < 1e-10
    assert abs(base.sum()) < 1e-10
    assert np.all(np.abs(base) <= bound + 1e-12)
