"""Multivariate normal algebra: linear images, conditioning, sampling, density.

All conditioning goes through Cholesky factorizations and triangular solves;
no covariance matrix is ever inverted explicitly. Factorizations use a fixed
jitter policy: add ``1e-10 * mean(diag)`` to the diagonal, retry once at
``1e-6 * mean(diag)``, then raise :class:`SingularCovarianceError`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .exceptions import SingularCovarianceError

__all__ = [
    "MvnDist",
    "chol_psd",
    "linear_image",
    "condition_on_linear",
    "condition_partitioned",
    "sample",
    "log_density",
]

_JITTER_SCALES = (0.0, 1e-10, 1e-6)
_LOG_2PI = np.log(2.0 * np.pi)


def chol_psd(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a PSD matrix under the jitter policy.

    Positive definite input factors exactly; jitter is added only when the
    plain factorization fails, so it never perturbs well-conditioned
    solves. An exactly zero matrix factors to zero. Matrices that fail
    after every jitter attempt raise :class:`SingularCovarianceError`.
    """
    cov = np.asarray(cov, dtype=np.float64)
    d = cov.shape[0]
    diag_scale = float(np.mean(np.clip(np.diag(cov), 0.0, None))) if d else 0.0
    if diag_scale == 0.0:
        if not np.any(cov):
            return np.zeros_like(cov)
        raise SingularCovarianceError(
            "matrix has zero diagonal but nonzero entries"
        )
    eye = np.eye(d)
    for scale in _JITTER_SCALES:
        try:
            return np.linalg.cholesky(cov + scale * diag_scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise SingularCovarianceError(
        f"covariance not PSD within jitter tolerance (dim {d})"
    )


def _check_symmetric(cov: np.ndarray) -> None:
    scale = np.max(np.abs(cov)) if cov.size else 0.0
    if scale == 0.0:
        return
    asym = np.max(np.abs(cov - cov.T))
    if asym > 1e-12 * scale:
        raise ValueError(f"covariance not symmetric (relative asymmetry {asym / scale:.3e})")


@dataclass(frozen=True)
class MvnDist:
    """Multivariate normal with mean vector and covariance matrix.

    The covariance must be symmetric to relative tolerance 1e-12 and PSD
    (its jittered Cholesky must succeed). Validated at construction.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("cov must be a square matrix")
        if cov.shape[0] != mean.shape[0]:
            raise ValueError(
                f"dimension mismatch: mean {mean.shape[0]}, cov {cov.shape[0]}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("mean and cov must be finite")
        _check_symmetric(cov)
        chol_psd(cov)  # PSD validation
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _check_matrix(H: np.ndarray, dim: int) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    if H.ndim != 2:
        raise ValueError("H must be a matrix")
    if H.shape[1] != dim:
        raise ValueError(f"dimension mismatch: H has {H.shape[1]} columns, dist dim {dim}")
    if not np.all(np.isfinite(H)):
        raise ValueError("H must be finite")
    return H


def linear_image(dist: MvnDist, H: np.ndarray) -> MvnDist:
    """Distribution of H X for X ~ dist: N(H mean, H cov H^T)."""
    H = _check_matrix(H, dist.dim)
    cov = H @ dist.cov @ H.T
    cov = 0.5 * (cov + cov.T)
    return MvnDist(H @ dist.mean, cov)


def condition_on_linear(dist: MvnDist, H: np.ndarray, obs: np.ndarray) -> MvnDist:
    """Condition X ~ dist on the exact linear observation H X = obs.

    Returns N(mean + C H^T S^{-1} (obs - H mean), C - C H^T S^{-1} H C)
    with S = H C H^T, solved through the jittered Cholesky of S.
    """
    H = _check_matrix(H, dist.dim)
    obs = np.atleast_1d(np.asarray(obs, dtype=np.float64))
    if obs.shape != (H.shape[0],):
        raise ValueError(
            f"dimension mismatch: obs has shape {obs.shape}, expected ({H.shape[0]},)"
        )
    S = H @ dist.cov @ H.T
    S = 0.5 * (S + S.T)
    try:
        L = chol_psd(S)
    except SingularCovarianceError as exc:
        raise SingularCovarianceError(
            f"singular conditioning: observation covariance not invertible ({exc})"
        ) from exc
    A = dist.cov @ H.T
    resid = obs - H @ dist.mean
    mean = dist.mean + A @ cho_solve((L, True), resid)
    cov = dist.cov - A @ cho_solve((L, True), A.T)
    cov = 0.5 * (cov + cov.T)
    return MvnDist(mean, cov)


def condition_partitioned(joint: MvnDist, k: int, obs: np.ndarray) -> MvnDist:
    """Condition the first k coordinates of joint on the remaining ones.

    Standard partitioned-Gaussian conditional: with blocks
    (mu1, mu2, S11, S12, S22), returns
    N(mu1 + S12 S22^{-1} (obs - mu2), S11 - S12 S22^{-1} S21).
    """
    if not 0 < k < joint.dim:
        raise ValueError(f"split k={k} must satisfy 0 < k < dim={joint.dim}")
    obs = np.atleast_1d(np.asarray(obs, dtype=np.float64))
    if obs.shape != (joint.dim - k,):
        raise ValueError(
            f"dimension mismatch: obs has shape {obs.shape}, expected ({joint.dim - k},)"
        )
    mu1 = joint.mean[:k]
    mu2 = joint.mean[k:]
    S11 = joint.cov[:k, :k]
    S12 = joint.cov[:k, k:]
    S22 = joint.cov[k:, k:]
    try:
        L = chol_psd(S22)
    except SingularCovarianceError as exc:
        raise SingularCovarianceError(
            f"singular conditioning: observed block not invertible ({exc})"
        ) from exc
    mean = mu1 + S12 @ cho_solve((L, True), obs - mu2)
    cov = S11 - S12 @ cho_solve((L, True), S12.T)
    cov = 0.5 * (cov + cov.T)
    return MvnDist(mean, cov)


def sample(dist: MvnDist, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` iid rows from dist; shape (count, dim)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    L = chol_psd(dist.cov)
    z = rng.standard_normal((count, dist.dim))
    return dist.mean + z @ L.T


def log_density(dist: MvnDist, x: np.ndarray) -> float:
    """Log density of dist at the point x."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (dist.dim,):
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, expected ({dist.dim},)")
    L = chol_psd(dist.cov)
    u = solve_triangular(L, x - dist.mean, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * (dist.dim * _LOG_2PI + logdet + u @ u))
