"""Weighted joint samples, adaptive normal-mixture KDE, and conditioning.

The joint sample holds rows (parameter block, data block). The KDE places
one Gaussian component on each sample point; its covariance is the weighted
sample covariance of the point's nearest neighbors (Mahalanobis metric from
the global weighted covariance) scaled by the bandwidth. Conditioning the
mixture on observed data-block values is closed form per component; the
reweighting runs in log space with max subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from . import backends
from .exceptions import EmptyPosteriorError, SingularCovarianceError
from .mvn import chol_psd

__all__ = [
    "WeightedJointSample",
    "NormalMixture",
    "local_covariance",
    "build_kde",
    "condition",
    "sample_mixture",
    "marginal_density",
    "mixture_moments",
    "effective_sample_size",
    "save_mixture",
    "load_mixture",
]

_LOG_2PI = np.log(2.0 * np.pi)
DEFAULT_NEIGHBORS = 500
DEFAULT_BANDWIDTH = 1.0


@dataclass(frozen=True)
class WeightedJointSample:
    """Weighted rows (theta, m) with ``split`` leading parameter columns."""

    points: np.ndarray
    weights: np.ndarray
    split: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty matrix")
        if w.shape != (pts.shape[0],):
            raise ValueError("one weight per row required")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must not all vanish")
        if not 0 < self.split <= pts.shape[1]:
            raise ValueError("split must select a nonempty leading block")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w / total)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def param_dim(self) -> int:
        return self.split

    @property
    def data_dim(self) -> int:
        return self.dim - self.split


@dataclass(frozen=True)
class NormalMixture:
    """Finite normal mixture: weights (n,), means (n, d), covs (n, d, d)."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        covs = np.asarray(self.covs, dtype=np.float64)
        n, d = means.shape
        if covs.shape != (n, d, d):
            raise ValueError(f"covs must have shape ({n}, {d}, {d})")
        if w.shape != (n,) or n == 0:
            raise ValueError("one weight per component required")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValueError("mixture entries must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if not np.isclose(total, 1.0, rtol=1e-8, atol=1e-12):
            raise ValueError("weights must sum to 1")
        scale = max(float(np.max(np.abs(covs))), 1.0)
        if np.max(np.abs(covs - covs.transpose(0, 2, 1))) > 1e-8 * scale:
            raise ValueError("component covariances must be symmetric")
        object.__setattr__(self, "weights", w / total)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def effective_sample_size(weights) -> float:
    """1 / sum(w^2) for normalized weights."""
    w = np.atleast_1d(np.asarray(weights, dtype=np.float64))
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must not all vanish")
    w = w / total
    return float(1.0 / np.sum(w * w))


def _whitened(sample: WeightedJointSample) -> np.ndarray:
    """Rows mapped so Euclidean distance = Mahalanobis distance under the
    global weighted covariance."""
    w = sample.weights
    mu = w @ sample.points
    xc = sample.points - mu
    cov = (xc * w[:, None]).T @ xc
    try:
        L = chol_psd(0.5 * (cov + cov.T))
    except SingularCovarianceError as exc:
        raise SingularCovarianceError(
            f"degenerate global sample covariance: {exc}"
        ) from exc
    if not np.any(L):
        raise SingularCovarianceError("degenerate global sample covariance: zero")
    return solve_triangular(L, xc.T, lower=True).T


def local_covariance(sample: WeightedJointSample, i: int, k: int) -> np.ndarray:
    """Weighted covariance of row i's neighborhood: {i} plus its k nearest
    other rows under the global Mahalanobis metric, centered on the
    neighborhood weighted mean."""
    n = sample.size
    if not 0 <= i < n:
        raise ValueError(f"index {i} outside sample of size {n}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must be in [1, {n - 1}]")
    xw = _whitened(sample)
    d2 = np.einsum("ij,ij->i", xw - xw[i], xw - xw[i])
    d2[i] = np.inf
    order = np.lexsort((np.arange(n), d2))
    nbr = order[:k]
    rows = np.concatenate([[i], nbr])
    w = sample.weights[rows]
    w = w / w.sum()
    pts = sample.points[rows]
    mu = w @ pts
    xc = pts - mu
    return (xc * w[:, None]).T @ xc


def build_kde(
    sample: WeightedJointSample,
    k: int = DEFAULT_NEIGHBORS,
    h: float = DEFAULT_BANDWIDTH,
) -> NormalMixture:
    """Adaptive KDE over the joint sample.

    Component i sits at the sample row with covariance h times the local
    neighborhood covariance; k is capped at n - 1. A single-row sample
    degenerates to one zero-covariance component.
    """
    if not (np.isfinite(h) and h > 0):
        raise ValueError("bandwidth must be positive")
    n = sample.size
    if n == 1:
        d = sample.dim
        return NormalMixture(
            np.ones(1), sample.points.copy(), np.zeros((1, d, d))
        )
    k_eff = min(int(k), n - 1)
    if k_eff < sample.dim + 2:
        raise ValueError(
            f"k={k_eff} too small for a stable {sample.dim}-dim local covariance "
            f"(need at least dim + 2 = {sample.dim + 2})"
        )
    xw = _whitened(sample)
    idx = backends.knn_search(xw, k_eff)
    _, covs = backends.neighborhood_moments(sample.points, idx, sample.weights)
    covs *= h
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    return NormalMixture(sample.weights.copy(), sample.points.copy(), covs)


def _chol_batch(covs: np.ndarray) -> np.ndarray:
    """Jittered Cholesky of a stack of PSD matrices."""
    n, d, _ = covs.shape
    diag = np.einsum("ndd->nd", covs)
    scale = np.clip(diag, 0.0, None).mean(axis=1)
    jitter = 1e-10 * scale
    eye = np.eye(d)
    try:
        return np.linalg.cholesky(covs + jitter[:, None, None] * eye)
    except np.linalg.LinAlgError:
        out = np.empty_like(covs)
        for i in range(n):
            out[i] = chol_psd(covs[i])
        return out


def condition(
    mix: NormalMixture,
    split: int,
    z_obs: np.ndarray,
    data_indices=None,
) -> NormalMixture:
    """Condition the joint mixture on observed data-block values.

    ``split`` is the parameter-block size; ``z_obs`` the observed values of
    the data block, optionally restricted to ``data_indices`` (0-based
    offsets into the data block; the other data coordinates marginalize
    out). Returns the parameter-block mixture with reweighted components;
    weights are computed in log space with max subtraction. Raises
    EmptyPosteriorError when every weight underflows.
    """
    if not 0 < split < mix.dim:
        raise ValueError(f"split={split} must satisfy 0 < split < dim={mix.dim}")
    q = mix.dim - split
    if data_indices is None:
        data_idx = np.arange(q, dtype=np.int64)
    else:
        data_idx = np.atleast_1d(np.asarray(data_indices, dtype=np.int64))
        if data_idx.ndim != 1 or data_idx.shape[0] == 0:
            raise ValueError("data_indices must be a nonempty vector")
        if np.any(data_idx < 0) or np.any(data_idx >= q):
            raise ValueError("data_indices outside the data block")
        if len(set(data_idx.tolist())) != data_idx.shape[0]:
            raise ValueError("data_indices must be distinct")
    z_obs = np.atleast_1d(np.asarray(z_obs, dtype=np.float64))
    if z_obs.shape != (data_idx.shape[0],):
        raise ValueError(
            f"dimension mismatch: z_obs {z_obs.shape}, expected ({data_idx.shape[0]},)"
        )
    cols = split + data_idx
    p = split
    S11 = mix.covs[:, :p, :p]
    S12 = mix.covs[:, :p, :][:, :, cols]
    S22 = mix.covs[:, cols[:, None], cols[None, :]]
    L = _chol_batch(S22)
    resid = z_obs[None, :] - mix.means[:, cols]
    u = np.linalg.solve(L, resid[:, :, None])[:, :, 0]
    W = np.linalg.solve(L, S12.transpose(0, 2, 1))
    qo = cols.shape[0]
    logdet = 2.0 * np.sum(np.log(np.einsum("ndd->nd", L)), axis=1)
    loglik = -0.5 * (qo * _LOG_2PI + logdet + np.einsum("nq,nq->n", u, u))
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights) + loglik
    top = np.max(logw)
    if not np.isfinite(top):
        maha = np.einsum("nq,nq->n", u, u)
        nearest = int(np.argmin(maha))
        raise EmptyPosteriorError(
            "all component weights underflowed while conditioning; nearest "
            f"component is {nearest} at squared Mahalanobis distance "
            f"{maha[nearest]:.6g}"
        )
    v = np.exp(logw - top)
    v /= v.sum()
    means = mix.means[:, :p] + np.einsum("nqp,nq->np", W, u)
    covs = S11 - np.einsum("nqp,nqr->npr", W, W)
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    return NormalMixture(v, means, covs)


def sample_mixture(mix: NormalMixture, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw rows from the mixture: component by weight, then its normal."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    d = mix.dim
    if count == 0:
        return np.empty((0, d))
    comp = rng.choice(mix.n_components, size=count, p=mix.weights)
    z = rng.standard_normal((count, d))
    out = np.empty((count, d))
    for j in np.unique(comp):
        rows = np.nonzero(comp == j)[0]
        L = chol_psd(mix.covs[j])
        out[rows] = mix.means[j] + z[rows] @ L.T
    return out


def marginal_density(mix: NormalMixture, coords, grid: np.ndarray) -> np.ndarray:
    """Marginal density over the selected coordinates at the grid points.

    ``coords`` is a sequence of coordinate indices; ``grid`` has shape
    (m,) for one coordinate or (m, len(coords)) in general.
    """
    coords = np.atleast_1d(np.asarray(coords, dtype=np.int64))
    if coords.ndim != 1 or coords.shape[0] == 0:
        raise ValueError("coords must be a nonempty vector")
    if np.any(coords < 0) or np.any(coords >= mix.dim):
        raise ValueError("coords outside the mixture dimension")
    if len(set(coords.tolist())) != coords.shape[0]:
        raise ValueError("coords must be distinct")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        if coords.shape[0] != 1:
            raise ValueError("1-D grid needs exactly one coordinate")
        grid = grid[:, None]
    if grid.ndim != 2 or grid.shape[1] != coords.shape[0]:
        raise ValueError(f"grid must have shape (m, {coords.shape[0]})")
    c = coords.shape[0]
    means = mix.means[:, coords]
    covs = mix.covs[:, coords[:, None], coords[None, :]]
    L = _chol_batch(covs)
    logdet = 2.0 * np.sum(np.log(np.einsum("ndd->nd", L)), axis=1)
    diff = grid[:, None, :] - means[None, :, :]
    u = np.linalg.solve(L[None, :, :, :], diff[:, :, :, None])[:, :, :, 0]
    loglik = -0.5 * (c * _LOG_2PI + logdet[None, :] + np.einsum("mnc,mnc->mn", u, u))
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    return np.exp(logsumexp(logw[None, :] + loglik, axis=1))


def mixture_moments(mix: NormalMixture):
    """Exact mean and covariance of the mixture."""
    mean = mix.weights @ mix.means
    xc = mix.means - mean
    cov = np.einsum("n,nij->ij", mix.weights, mix.covs)
    cov = cov + (xc * mix.weights[:, None]).T @ xc
    return mean, 0.5 * (cov + cov.T)


_FORMAT_HEADER = "anchorinv-mixture-v1"


def save_mixture(mix: NormalMixture, path) -> None:
    """Plain-text serialization: a header line ``anchorinv-mixture-v1
    <n_components> <dim>``, then one line per component holding weight,
    mean entries, and the row-major covariance entries."""
    n, d = mix.n_components, mix.dim
    with open(path, "w") as fh:
        fh.write(f"{_FORMAT_HEADER} {n} {d}\n")
        for i in range(n):
            row = np.concatenate(
                [[mix.weights[i]], mix.means[i], mix.covs[i].reshape(-1)]
            )
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_mixture(path) -> NormalMixture:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != _FORMAT_HEADER:
            raise ValueError(f"{path}: not a {_FORMAT_HEADER} file")
        n, d = int(header[1]), int(header[2])
        weights = np.empty(n)
        means = np.empty((n, d))
        covs = np.empty((n, d, d))
        for i in range(n):
            parts = fh.readline().split()
            if len(parts) != 1 + d + d * d:
                raise ValueError(f"{path}: component {i} malformed")
            vals = np.array([float(p) for p in parts])
            weights[i] = vals[0]
            means[i] = vals[1 : 1 + d]
            covs[i] = vals[1 + d :].reshape(d, d)
    return NormalMixture(weights, means, covs)
