"""Hierarchical posterior for the structural parameters (trend, variance, range).

Model for point data y* at locations x*: y* ~ N(X* beta, eta2 * R*(lam)),
prior p(lam) uniform on a bounded support times (eta2)^(-a). The posterior
factorizes for sampling:

  1. lam on a uniform grid over its support, weighted by
     |R*|^(-1/2) |Q|^(-1/2) (S^2)^(-nu/2), Q = X*^T R*^{-1} X*,
     S^2 the generalized residual sum of squares, nu = n + 2a - d_beta - 2;
  2. eta2 | lam: scaled inverse chi-square, drawn as S^2 / chisq(nu);
  3. beta | eta2, lam: N(bhat, eta2 * Q^{-1}).

The same algebra applies verbatim to linear-functional anchor data with
R* = H R H^T and X* = H X (point data is the special case where H selects
grid nodes), which is how the engine conditions on type-A anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .field import Grid1D, StructuralParams, correlation_matrix
from .mvn import chol_psd

__all__ = [
    "StructuralPrior",
    "StructuralPosterior",
    "lambda_posterior_logdensity",
    "sample_variance_given_lambda",
    "sample_trend_given_variance",
    "sample_structural",
]


@dataclass(frozen=True)
class StructuralPrior:
    """Uniform range prior on an open interval times (eta2)^(-a)."""

    lambda_support: tuple
    a: float = 1.0
    lambda_grid_size: int = 200

    def __post_init__(self):
        lo, hi = (float(v) for v in self.lambda_support)
        if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo < hi):
            raise ValueError("lambda_support must satisfy 0 < lower < upper")
        if self.lambda_grid_size < 2:
            raise ValueError("lambda_grid_size must be at least 2")
        object.__setattr__(self, "lambda_support", (lo, hi))
        object.__setattr__(self, "a", float(self.a))

    def lambda_grid(self) -> np.ndarray:
        """Cell midpoints of the uniform discretization of the support.

        Midpoints keep sampled ranges strictly inside the open support, so
        a logit transform with the support as bounds stays finite.
        """
        lo, hi = self.lambda_support
        m = self.lambda_grid_size
        step = (hi - lo) / m
        return lo + step * (np.arange(m) + 0.5)


def _as_point_data(x, y, X):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be matching vectors")
    if X is None:
        X = np.ones((x.shape[0], 1))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != x.shape[0]:
        raise ValueError("design matrix rows must match data length")
    return x, y, X


class _LambdaStats:
    """Per-range factorizations that do not depend on the data values."""

    __slots__ = ("chol_R", "logdet_R", "Rinv_X", "chol_Q", "logdet_Q")

    def __init__(self, Rstar: np.ndarray, Xstar: np.ndarray):
        Rstar = 0.5 * (Rstar + Rstar.T)
        self.chol_R = chol_psd(Rstar)
        self.logdet_R = 2.0 * float(np.sum(np.log(np.diag(self.chol_R))))
        self.Rinv_X = cho_solve((self.chol_R, True), Xstar)
        Q = Xstar.T @ self.Rinv_X
        self.chol_Q = chol_psd(0.5 * (Q + Q.T))
        self.logdet_Q = 2.0 * float(np.sum(np.log(np.diag(self.chol_Q))))


def _value_stats(stats: _LambdaStats, Xstar: np.ndarray, y: np.ndarray):
    """GLS estimate and residual quadratic form for one range value."""
    bhat = cho_solve((stats.chol_Q, True), stats.Rinv_X.T @ y)
    resid = y - Xstar @ bhat
    S2 = float(resid @ cho_solve((stats.chol_R, True), resid))
    return bhat, S2


class _LambdaCache:
    """Range grid plus cached per-range factorizations for fixed locations."""

    def __init__(self, prior: StructuralPrior, make_Rstar, Xstar: np.ndarray):
        self.prior = prior
        self.Xstar = np.asarray(Xstar, dtype=np.float64)
        self.lambda_grid = prior.lambda_grid()
        self.stats = [_LambdaStats(make_Rstar(lam), self.Xstar) for lam in self.lambda_grid]
        n, d_beta = self.Xstar.shape
        self.nu = n + 2.0 * prior.a - d_beta - 2.0
        if self.nu <= 0:
            raise ValueError(
                f"posterior undefined: n + 2a - d_beta - 2 = {self.nu} <= 0"
            )


class StructuralPosterior:
    """Discretized structural posterior with cached per-range factors.

    Use :meth:`from_points` for point data or :meth:`from_anchors` for
    linear-functional anchor data. :meth:`rebind` swaps in new data values
    while reusing the factorizations (the locations define them).
    """

    def __init__(self, cache: _LambdaCache, y: np.ndarray):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if y.shape != (cache.Xstar.shape[0],):
            raise ValueError("data values must match the cached locations")
        if not np.all(np.isfinite(y)):
            raise ValueError("data values must be finite")
        self._cache = cache
        self.y = y
        m = cache.lambda_grid.shape[0]
        self._bhat = np.empty((m, cache.Xstar.shape[1]))
        self._S2 = np.empty(m)
        lw = np.empty(m)
        for j, st in enumerate(cache.stats):
            bhat, S2 = _value_stats(st, cache.Xstar, y)
            if not (np.isfinite(S2) and S2 > 0):
                raise ValueError(
                    "degenerate residual quadratic form: data values lie in "
                    "the trend column space"
                )
            self._bhat[j] = bhat
            self._S2[j] = S2
            lw[j] = -0.5 * st.logdet_R - 0.5 * st.logdet_Q - 0.5 * cache.nu * np.log(S2)
        lw -= np.max(lw)
        w = np.exp(lw)
        w /= w.sum()
        self.lambda_log_weights = lw
        self.weights = w

    @classmethod
    def from_points(cls, x, y, X=None, prior: StructuralPrior = None) -> "StructuralPosterior":
        if prior is None:
            raise ValueError("prior is required")
        x, y, X = _as_point_data(x, y, X)
        cache = _LambdaCache(prior, lambda lam: correlation_matrix(x, lam), X)
        return cls(cache, y)

    @classmethod
    def from_anchors(
        cls,
        grid: Grid1D,
        X_field: np.ndarray,
        H: np.ndarray,
        values,
        prior: StructuralPrior,
    ) -> "StructuralPosterior":
        H = np.atleast_2d(np.asarray(H, dtype=np.float64))
        X_field = np.asarray(X_field, dtype=np.float64)
        if H.shape[1] != grid.size or X_field.shape[0] != grid.size:
            raise ValueError("anchor matrix and design must match the grid")
        Xstar = H @ X_field
        loc = grid.locations

        def make_Rstar(lam):
            return H @ correlation_matrix(loc, lam) @ H.T

        cache = _LambdaCache(prior, make_Rstar, Xstar)
        return cls(cache, values)

    def rebind(self, y) -> "StructuralPosterior":
        """Same locations and prior, new data values. Cheap."""
        return StructuralPosterior(self._cache, y)

    @property
    def lambda_grid(self) -> np.ndarray:
        return self._cache.lambda_grid

    @property
    def nu(self) -> float:
        return self._cache.nu

    def sample(self, count: int, rng: np.random.Generator):
        """Draw structural parameters; returns (params list, grid indices).

        RNG call order is fixed (range indices, then chi-square draws, then
        trend normals) so results do not depend on how draws are grouped.
        """
        if count < 0:
            raise ValueError("count must be nonnegative")
        cache = self._cache
        m = cache.lambda_grid.shape[0]
        idx = rng.choice(m, size=count, p=self.weights)
        chis = rng.chisquare(cache.nu, size=count)
        if np.any(chis <= 0):  # never in practice; guards division
            chis = np.clip(chis, np.finfo(np.float64).tiny, None)
        eta2 = self._S2[idx] / chis
        d_beta = cache.Xstar.shape[1]
        z = rng.standard_normal((count, d_beta))
        beta = np.empty((count, d_beta))
        for j in np.unique(idx):
            rows = np.nonzero(idx == j)[0]
            corr = solve_triangular(
                cache.stats[j].chol_Q.T, z[rows].T, lower=False
            ).T
            beta[rows] = self._bhat[j] + np.sqrt(eta2[rows])[:, None] * corr
        params = [
            StructuralParams(beta[i], eta2[i], cache.lambda_grid[idx[i]])
            for i in range(count)
        ]
        return params, idx


def _stats_at(lam: float, x, y, X, prior: StructuralPrior):
    x, y, X = _as_point_data(x, y, X)
    n, d_beta = X.shape
    nu = n + 2.0 * prior.a - d_beta - 2.0
    if nu <= 0:
        raise ValueError(f"posterior undefined: n + 2a - d_beta - 2 = {nu} <= 0")
    st = _LambdaStats(correlation_matrix(x, lam), X)
    bhat, S2 = _value_stats(st, X, y)
    if not (np.isfinite(S2) and S2 > 0):
        raise ValueError("degenerate residual quadratic form")
    return st, bhat, S2, nu


def lambda_posterior_logdensity(lam: float, x, y, X, prior: StructuralPrior) -> float:
    """Unnormalized log posterior density of the correlation range.

    Returns -inf outside the prior support (the uniform range prior is a
    constant factor inside it).
    """
    lo, hi = prior.lambda_support
    if not lo < lam < hi:
        return float("-inf")
    st, _, S2, nu = _stats_at(lam, x, y, X, prior)
    return float(-0.5 * st.logdet_R - 0.5 * st.logdet_Q - 0.5 * nu * np.log(S2))


def sample_variance_given_lambda(
    lam: float, x, y, X, prior: StructuralPrior, rng: np.random.Generator
) -> float:
    """One draw of the field variance given the range: S^2 / chisq(nu)."""
    _, _, S2, nu = _stats_at(lam, x, y, X, prior)
    return float(S2 / rng.chisquare(nu))


def sample_trend_given_variance(
    lam: float, eta2: float, x, y, X, rng: np.random.Generator
) -> np.ndarray:
    """One draw of the trend coefficients given variance and range."""
    if not (np.isfinite(eta2) and eta2 > 0):
        raise ValueError("eta2 must be positive")
    x, y, X = _as_point_data(x, y, X)
    st = _LambdaStats(correlation_matrix(x, lam), X)
    bhat, _ = _value_stats(st, X, y)
    z = rng.standard_normal(X.shape[1])
    return bhat + np.sqrt(eta2) * solve_triangular(st.chol_Q.T, z, lower=False)


def sample_structural(
    x, y, X, prior: StructuralPrior, count: int, rng: np.random.Generator
):
    """Draw ``count`` structural parameter sets from the posterior."""
    post = StructuralPosterior.from_points(x, y, X, prior)
    params, _ = post.sample(count, rng)
    return params
