"""Hierarchical structural posterior against independent numeric oracles."""

import numpy as np
import pytest

from anchorinv.field import Grid1D, correlation_matrix
from anchorinv.prior import (
    StructuralPosterior,
    StructuralPrior,
    lambda_posterior_logdensity,
    sample_structural,
    sample_trend_given_variance,
    sample_variance_given_lambda,
)

X7 = np.array([1.0, 2.0, 4.0, 7.0, 9.0, 11.0, 14.0])
Y7 = np.array([0.30, -0.20, 0.85, 0.40, -0.55, 0.10, 0.65])
PRIOR7 = StructuralPrior((1.0, 15.0), a=1.0, lambda_grid_size=24)


def quad_coeffs(lam, x, y):
    """Quadratic-form pieces of the Gaussian exponent via a dense solve."""
    R = correlation_matrix(x, lam)
    Rinv_y = np.linalg.solve(R, y)
    ones = np.ones_like(y)
    Rinv_1 = np.linalg.solve(R, ones)
    a = float(y @ Rinv_y)
    b = float(ones @ Rinv_y)
    c = float(ones @ Rinv_1)
    sign, logdet = np.linalg.slogdet(R)
    assert sign > 0
    return a, b, c, logdet


def brute_lambda_weights(x, y, prior):
    """Posterior weights of the range atoms by direct 2-D integration of
    likelihood times prior over (beta, log eta2)."""
    n = x.shape[0]
    logs = []
    for lam in prior.lambda_grid():
        a, b, c, logdet = quad_coeffs(lam, x, y)
        bhat = b / c
        S2 = a - b * b / c
        betas = bhat + np.linspace(-10.0, 10.0, 1001) * np.sqrt(S2 / c)
        logetas = np.log(S2 / n) + np.linspace(-9.0, 9.0, 601)
        eta2 = np.exp(logetas)[:, None]
        quad = a - 2.0 * b * betas[None, :] + c * betas[None, :] ** 2
        # extra +1 power of eta2: integration measure d(eta2) = eta2 d(log eta2)
        logint = (
            -0.5 * n * np.log(2.0 * np.pi * eta2)
            - 0.5 * logdet
            - 0.5 * quad / eta2
            + (1.0 - prior.a) * np.log(eta2)
        )
        m = logint.max()
        total = np.trapezoid(
            np.trapezoid(np.exp(logint - m), betas, axis=1), logetas
        )
        logs.append(m + np.log(total))
    logs = np.array(logs)
    w = np.exp(logs - logs.max())
    return w / w.sum()


def test_lambda_weights_match_quadrature_oracle():
    post = StructuralPosterior.from_points(X7, Y7, prior=PRIOR7)
    oracle = brute_lambda_weights(X7, Y7, PRIOR7)
    np.testing.assert_allclose(post.weights, oracle, rtol=2e-3, atol=1e-9)


def test_lambda_grid_midpoints():
    grid = StructuralPrior((2.0, 10.0), lambda_grid_size=4).lambda_grid()
    np.testing.assert_allclose(grid, [3.0, 5.0, 7.0, 9.0])
    lo, hi = 5.0, 80.0
    g = StructuralPrior((lo, hi), lambda_grid_size=200).lambda_grid()
    assert g.min() > lo and g.max() < hi
    assert g.shape == (200,)


def test_nu_formula_and_rejection():
    post = StructuralPosterior.from_points(X7, Y7, prior=PRIOR7)
    assert post.nu == 7 + 2 - 1 - 2
    with pytest.raises(ValueError, match="posterior undefined"):
        # n=1, a=1, d_beta=1 gives nu = 0
        StructuralPosterior.from_points(
            np.array([1.0]), np.array([0.5]), prior=PRIOR7
        )


def test_degenerate_data_rejected():
    # constant data lie exactly in the span of the intercept column
    with pytest.raises(ValueError, match="trend column space"):
        StructuralPosterior.from_points(
            X7, np.full(7, 0.4), prior=PRIOR7
        )


def test_variance_conditional_mean():
    lam = 6.0
    a, b, c, _ = quad_coeffs(lam, X7, Y7)
    S2 = a - b * b / c
    nu = 6.0
    rng = np.random.default_rng(21)
    draws = np.array(
        [sample_variance_given_lambda(lam, X7, Y7, None, PRIOR7, rng) for _ in range(30000)]
    )
    expected_mean = S2 / (nu - 2.0)
    expected_sd = expected_mean * np.sqrt(2.0 / (nu - 4.0))
    se = expected_sd / np.sqrt(draws.shape[0])
    assert abs(draws.mean() - expected_mean) < 4.0 * se
    assert np.all(draws > 0)


def test_trend_conditional_moments():
    lam, eta2 = 6.0, 0.4
    a, b, c, _ = quad_coeffs(lam, X7, Y7)
    rng = np.random.default_rng(22)
    draws = np.array(
        [
            sample_trend_given_variance(lam, eta2, X7, Y7, None, rng)[0]
            for _ in range(20000)
        ]
    )
    sd = np.sqrt(eta2 / c)
    assert abs(draws.mean() - b / c) < 4.0 * sd / np.sqrt(draws.shape[0])
    assert abs(draws.std() - sd) < 0.03 * sd


def test_sample_lambda_frequencies():
    post = StructuralPosterior.from_points(X7, Y7, prior=PRIOR7)
    rng = np.random.default_rng(23)
    params, idx = post.sample(20000, rng)
    grid = post.lambda_grid
    lams = np.array([p.lam for p in params])
    np.testing.assert_allclose(lams, grid[idx])
    assert set(np.unique(lams)).issubset(set(grid.tolist()))
    freq = np.bincount(idx, minlength=grid.shape[0]) / 20000.0
    assert 0.5 * np.abs(freq - post.weights).sum() < 0.02  # total variation
    assert all(p.eta2 > 0 for p in params)


def test_rebind_swaps_values():
    post = StructuralPosterior.from_points(X7, Y7, prior=PRIOR7)
    same = post.rebind(Y7)
    np.testing.assert_allclose(same.weights, post.weights)
    other = post.rebind(Y7[::-1].copy())
    assert not np.allclose(other.weights, post.weights)


def test_logdensity_consistent_with_weights():
    post = StructuralPosterior.from_points(X7, Y7, prior=PRIOR7)
    grid = post.lambda_grid
    ld = np.array(
        [lambda_posterior_logdensity(lam, X7, Y7, None, PRIOR7) for lam in grid]
    )
    lw = np.log(post.weights)
    np.testing.assert_allclose(
        ld - ld[0], lw - lw[0], atol=1e-9
    )
    assert lambda_posterior_logdensity(0.5, X7, Y7, None, PRIOR7) == -np.inf
    assert lambda_posterior_logdensity(20.0, X7, Y7, None, PRIOR7) == -np.inf


def test_from_anchors_reduces_to_points():
    grid = Grid1D.regular(10)
    sel = [2, 5, 8]
    H = np.zeros((3, 10))
    H[np.arange(3), sel] = 1.0
    y = np.array([0.2, -0.4, 0.7])
    prior = StructuralPrior((1.0, 9.0), lambda_grid_size=16)
    via_anchors = StructuralPosterior.from_anchors(
        grid, np.ones((10, 1)), H, y, prior
    )
    via_points = StructuralPosterior.from_points(grid.locations[sel], y, prior=prior)
    np.testing.assert_allclose(via_anchors.weights, via_points.weights, atol=1e-12)
    assert via_anchors.nu == via_points.nu


def test_functional_anchor_posterior_is_proper():
    # averaging anchors (non-point rows) must work through the same algebra
    grid = Grid1D.regular(10)
    H = np.zeros((3, 10))
    H[0, :5] = 0.2
    H[1, 5:] = 0.2
    H[2, 4] = 1.0
    prior = StructuralPrior((1.0, 9.0), lambda_grid_size=16)
    post = StructuralPosterior.from_anchors(
        grid, np.ones((10, 1)), H, np.array([0.1, -0.3, 0.5]), prior
    )
    assert np.isclose(post.weights.sum(), 1.0)
    params, _ = post.sample(50, np.random.default_rng(3))
    assert all(1.0 < p.lam < 9.0 for p in params)


def test_sample_structural_wrapper():
    rng = np.random.default_rng(24)
    params = sample_structural(X7, Y7, None, PRIOR7, 5, rng)
    assert len(params) == 5
    assert all(1.0 < p.lam < 15.0 for p in params)
