"""Pure numpy/scipy implementations of the hot kernels.

Same contracts as the compiled backend:

  tridiag_solve          one tridiagonal system (Thomas-equivalent solve)
  tridiag_solve_batch    many independent tridiagonal systems
  knn_search             k nearest neighbors (excluding self) by squared
                         Euclidean distance, ties broken by smaller index;
                         re-exported by the compiled backend (vectorized
                         selection beats scalar C for this kernel)
  neighborhood_moments   weighted mean/covariance over {i} + its neighbors

Chunk sizes are fixed constants so results never depend on caller
parallelism.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

NAME = "python"

_KNN_CHUNK = 256
_MOMENT_CHUNK = 256


def tridiag_solve(dl, d, du, b):
    """Solve the tridiagonal system with subdiagonal dl, diagonal d,
    superdiagonal du. Shapes: dl/du (m-1,), d (m,), b (m,)."""
    d = np.asarray(d, dtype=np.float64)
    m = d.shape[0]
    if m == 1:
        return np.asarray(b, dtype=np.float64) / d
    ab = np.zeros((3, m))
    ab[0, 1:] = du
    ab[1] = d
    ab[2, :-1] = dl
    return solve_banded((1, 1), ab, b)


def tridiag_solve_batch(dl, d, du, b):
    """Solve ns independent tridiagonal systems by vectorized elimination.

    Shapes: dl/du (ns, m-1), d (ns, m), b (ns, m). Rows whose elimination
    breaks down come back non-finite; callers mask them.
    """
    d = np.asarray(d, dtype=np.float64)
    dl = np.asarray(dl, dtype=np.float64)
    du = np.asarray(du, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ns, m = d.shape
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cp = np.empty((ns, m - 1)) if m > 1 else np.empty((ns, 0))
        dp = np.empty((ns, m))
        dp[:, 0] = b[:, 0] / d[:, 0]
        if m > 1:
            cp[:, 0] = du[:, 0] / d[:, 0]
        for j in range(1, m):
            denom = d[:, j] - dl[:, j - 1] * cp[:, j - 1]
            if j < m - 1:
                cp[:, j] = du[:, j] / denom
            dp[:, j] = (b[:, j] - dl[:, j - 1] * dp[:, j - 1]) / denom
        x = np.empty((ns, m))
        x[:, m - 1] = dp[:, m - 1]
        for j in range(m - 2, -1, -1):
            x[:, j] = dp[:, j] - cp[:, j] * x[:, j + 1]
    return x


def knn_search(points, k, include_self=False):
    """Indices (n, k) of the k nearest neighbors of each row of ``points``.

    Squared Euclidean distance; the point itself is excluded unless
    ``include_self``. Exact ties are broken by the smaller index. Output
    rows are sorted by (distance, index).
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    limit = n if include_self else n - 1
    if not 1 <= k <= limit:
        raise ValueError(f"k={k} must be in [1, {limit}]")
    sq = np.einsum("ij,ij->i", pts, pts)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        dist = sq[start:stop, None] + sq[None, :] - 2.0 * (pts[start:stop] @ pts.T)
        np.maximum(dist, 0.0, out=dist)
        if not include_self:
            dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        cand = np.argpartition(dist, k - 1, axis=1)[:, :k]
        # argpartition fixes the selected value multiset but picks arbitrary
        # members of a tie that straddles the k boundary; repair those rows
        kth = np.take_along_axis(dist, cand, axis=1).max(axis=1)
        bad = np.count_nonzero(dist <= kth[:, None], axis=1) > k
        for r in np.flatnonzero(bad):
            row = dist[r]
            keep = np.flatnonzero(row < kth[r])
            tied = np.flatnonzero(row == kth[r])[: k - keep.size]
            cand[r] = np.concatenate([keep, tied])
        # order candidates by (distance, index): sort by index first, then a
        # stable sort by distance
        order = np.argsort(cand, axis=1)
        cand = np.take_along_axis(cand, order, axis=1)
        dsel = np.take_along_axis(dist, cand, axis=1)
        order = np.argsort(dsel, axis=1, kind="stable")
        out[start:stop] = np.take_along_axis(cand, order, axis=1)
    return out


def neighborhood_moments(points, idx, weights):
    """Weighted mean and covariance of each point's neighborhood.

    The neighborhood of point i is {i} plus the rows listed in idx[i].
    Weights are renormalized within each neighborhood; the covariance is
    taken around the neighborhood weighted mean (no dof correction).
    Returns (means (n, d), covs (n, d, d)).
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    n, d = pts.shape
    k1 = idx.shape[1] + 1
    means = np.empty((n, d))
    covs = np.empty((n, d, d))
    full = np.concatenate([np.arange(n, dtype=np.int64)[:, None], idx], axis=1)
    for start in range(0, n, _MOMENT_CHUNK):
        stop = min(start + _MOMENT_CHUNK, n)
        rows = full[start:stop]
        xw = w[rows]
        xw = xw / xw.sum(axis=1, keepdims=True)
        xp = pts[rows]  # (c, k1, d)
        mu = np.einsum("ck,ckd->cd", xw, xp)
        xc = xp - mu[:, None, :]
        xs = xc * np.sqrt(xw)[:, :, None]
        covs[start:stop] = np.matmul(xs.transpose(0, 2, 1), xs)
        means[start:stop] = mu
    return means, covs
