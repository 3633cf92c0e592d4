# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Thomas tridiagonal solves and neighborhood covariance
accumulation. Contracts match _kernels_py.

k-NN is the one kernel where scalar C loses: the vectorized numpy path
(BLAS dot blocks plus introselect) is ~3x faster on a single core, so this
backend re-exports it. knn_search_ref below is the independent scalar
implementation, kept because it orders candidates by exact (distance,
index) comparison and so serves as the tie-contract oracle in tests."""

import numpy as np

from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

from anchorinv.backends._kernels_py import knn_search

NAME = "compiled"

DEF KNN_CHUNK = 256


def tridiag_solve(dl, d, du, b):
    """Solve one tridiagonal system by Thomas elimination."""
    cdef double[::1] dlv = np.ascontiguousarray(dl, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] duv = np.ascontiguousarray(du, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t m = dv.shape[0]
    if dlv.shape[0] != m - 1 or duv.shape[0] != m - 1 or bv.shape[0] != m:
        raise ValueError("inconsistent tridiagonal shapes")
    x_arr = np.empty(m)
    cp_arr = np.empty(m - 1 if m > 1 else 0)
    cdef double[::1] x = x_arr
    cdef double[::1] cp = cp_arr
    cdef Py_ssize_t j
    cdef double denom
    with nogil:
        denom = dv[0]
        x[0] = bv[0] / denom
        if m > 1:
            cp[0] = duv[0] / denom
            for j in range(1, m):
                denom = dv[j] - dlv[j - 1] * cp[j - 1]
                if j < m - 1:
                    cp[j] = duv[j] / denom
                x[j] = (bv[j] - dlv[j - 1] * x[j - 1]) / denom
            for j in range(m - 2, -1, -1):
                x[j] = x[j] - cp[j] * x[j + 1]
    return x_arr


def tridiag_solve_batch(dl, d, du, b):
    """Solve ns independent tridiagonal systems; rows that break down
    come back non-finite."""
    cdef double[:, ::1] dlv = np.ascontiguousarray(dl, dtype=np.float64)
    cdef double[:, ::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[:, ::1] duv = np.ascontiguousarray(du, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t ns = dv.shape[0]
    cdef Py_ssize_t m = dv.shape[1]
    x_arr = np.empty((ns, m))
    cp_arr = np.empty(m - 1 if m > 1 else 0)
    cdef double[:, ::1] x = x_arr
    cdef double[::1] cp = cp_arr
    cdef Py_ssize_t s, j
    cdef double denom
    with nogil:
        for s in range(ns):
            denom = dv[s, 0]
            x[s, 0] = bv[s, 0] / denom
            if m > 1:
                cp[0] = duv[s, 0] / denom
                for j in range(1, m):
                    denom = dv[s, j] - dlv[s, j - 1] * cp[j - 1]
                    if j < m - 1:
                        cp[j] = duv[s, j] / denom
                    x[s, j] = (bv[s, j] - dlv[s, j - 1] * x[s, j - 1]) / denom
                for j in range(m - 2, -1, -1):
                    x[s, j] = x[s, j] - cp[j] * x[s, j + 1]
    return x_arr


cdef inline bint _lex_less(double d1, long i1, double d2, long i2) nogil:
    return d1 < d2 or (d1 == d2 and i1 < i2)


cdef inline void _swap(double* ds, long* ix, Py_ssize_t a, Py_ssize_t b) nogil:
    cdef double td = ds[a]
    cdef long ti = ix[a]
    ds[a] = ds[b]; ix[a] = ix[b]
    ds[b] = td; ix[b] = ti


cdef void _lex_select(double* ds, long* ix, Py_ssize_t size, Py_ssize_t k) nogil:
    """Quickselect: move the k lexicographically smallest (value, index)
    pairs into the first k slots, unordered. Indices are distinct, so the
    order is strict and the median-of-three ends act as scan sentinels."""
    cdef Py_ssize_t lo = 0, hi = size - 1, i, j, mid
    cdef double pd
    cdef long pi
    while lo < hi:
        mid = lo + ((hi - lo) >> 1)
        if _lex_less(ds[mid], ix[mid], ds[lo], ix[lo]):
            _swap(ds, ix, lo, mid)
        if _lex_less(ds[hi], ix[hi], ds[lo], ix[lo]):
            _swap(ds, ix, lo, hi)
        if _lex_less(ds[hi], ix[hi], ds[mid], ix[mid]):
            _swap(ds, ix, mid, hi)
        pd = ds[mid]
        pi = ix[mid]
        i = lo - 1
        j = hi + 1
        while True:
            i += 1
            while _lex_less(ds[i], ix[i], pd, pi):
                i += 1
            j -= 1
            while _lex_less(pd, pi, ds[j], ix[j]):
                j -= 1
            if i >= j:
                break
            _swap(ds, ix, i, j)
        if j < k - 1:
            lo = j + 1
        elif j >= k:
            hi = j
        else:
            break


cdef inline void _sift_down(double* hd, long* hi, Py_ssize_t size, Py_ssize_t root) nogil:
    cdef Py_ssize_t child
    cdef double td
    cdef long ti
    while True:
        child = 2 * root + 1
        if child >= size:
            break
        if child + 1 < size and _lex_less(hd[child], hi[child], hd[child + 1], hi[child + 1]):
            child += 1
        if _lex_less(hd[root], hi[root], hd[child], hi[child]):
            td = hd[root]; hd[root] = hd[child]; hd[child] = td
            ti = hi[root]; hi[root] = hi[child]; hi[child] = ti
            root = child
        else:
            break


def knn_search_ref(points, k, include_self=False):
    """Scalar reference k-NN: indices (n, k) of the k nearest neighbors of
    each row (squared Euclidean; self excluded unless include_self; ties by
    smaller index; rows sorted by (distance, index)).

    Every candidate goes through the exact lexicographic comparator, so this
    is the ground truth for tie ordering. Production calls go to the
    re-exported vectorized knn_search instead; see the module docstring."""
    pts_arr = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] pts = pts_arr
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef Py_ssize_t kk = k
    cdef bint with_self = bool(include_self)
    cdef Py_ssize_t limit = n if with_self else n - 1
    if not 1 <= kk <= limit:
        raise ValueError(f"k={k} must be in [1, {limit}]")
    sq_arr = np.einsum("ij,ij->i", pts_arr, pts_arr)
    out_arr = np.empty((n, kk), dtype=np.int64)
    cdef double[::1] sq = sq_arr
    cdef long[:, ::1] out = out_arr
    dbuf_arr = np.empty((KNN_CHUNK, n))
    cand_d_arr = np.empty(n)
    cand_i_arr = np.empty(n, dtype=np.int64)
    cdef double[:, ::1] dbuf = dbuf_arr
    cdef double[::1] cand_d = cand_d_arr
    cdef long[::1] cand_i = cand_i_arr
    cdef Py_ssize_t start, stop, c, r, i, j, size, end
    cdef double dist, sqi
    start = 0
    while start < n:
        stop = start + KNN_CHUNK
        if stop > n:
            stop = n
        c = stop - start
        # numpy matmul so the dot block rides the threaded BLAS
        np.matmul(pts_arr[start:stop], pts_arr.T, out=dbuf_arr[:c])
        with nogil:
            for r in range(c):
                i = start + r
                sqi = sq[i]
                size = 0
                for j in range(n):
                    if j == i and not with_self:
                        continue
                    dist = sqi + sq[j] - 2.0 * dbuf[r, j]
                    if dist < 0.0:
                        dist = 0.0
                    cand_d[size] = dist
                    cand_i[size] = j
                    size += 1
                if kk < size:
                    _lex_select(&cand_d[0], &cand_i[0], size, kk)
                # heap-sort the selected block ascending by (distance, index)
                for end in range(kk // 2 - 1, -1, -1):
                    _sift_down(&cand_d[0], &cand_i[0], kk, end)
                for end in range(kk - 1, 0, -1):
                    _swap(&cand_d[0], &cand_i[0], 0, end)
                    _sift_down(&cand_d[0], &cand_i[0], end, 0)
                for j in range(kk):
                    out[i, j] = cand_i[j]
        start = stop
    return out_arr


def neighborhood_moments(points, idx, weights):
    """Weighted mean/covariance of {i} + idx[i] for each point, centered on
    the neighborhood weighted mean. Returns (means (n, d), covs (n, d, d))."""
    pts_arr = np.ascontiguousarray(points, dtype=np.float64)
    idx_arr = np.ascontiguousarray(idx, dtype=np.int64)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[:, ::1] pts = pts_arr
    cdef long[:, ::1] nbr = idx_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef Py_ssize_t k1 = nbr.shape[1] + 1
    means_arr = np.empty((n, d))
    covs_arr = np.empty((n, d, d))
    buf_arr = np.empty((k1, d))
    wbuf_arr = np.empty(k1)
    mu_arr = np.empty(d)
    cdef double[:, ::1] means = means_arr
    cdef double[:, :, ::1] covs = covs_arr
    cdef double[:, ::1] buf = buf_arr
    cdef double[::1] wbuf = wbuf_arr
    cdef double[::1] mu = mu_arr
    cdef Py_ssize_t i, r, j, row
    cdef double wsum, wr
    cdef int bm, bn, bk, lda, ldb, ldc
    cdef double alpha = 1.0, beta = 0.0
    cdef char* transT = 'T'
    cdef char* transN = 'N'
    with nogil:
        bm = <int> d; bn = <int> d; bk = <int> k1
        lda = <int> d; ldb = <int> d; ldc = <int> d
        for i in range(n):
            wsum = w[i]
            wbuf[0] = w[i]
            for r in range(1, k1):
                wbuf[r] = w[nbr[i, r - 1]]
                wsum += wbuf[r]
            for j in range(d):
                mu[j] = 0.0
            for r in range(k1):
                row = i if r == 0 else nbr[i, r - 1]
                wr = wbuf[r] / wsum
                wbuf[r] = wr
                for j in range(d):
                    buf[r, j] = pts[row, j]
                    mu[j] += wr * pts[row, j]
            for r in range(k1):
                wr = sqrt(wbuf[r])
                for j in range(d):
                    buf[r, j] = (buf[r, j] - mu[j]) * wr
            dgemm(transN, transT, &bm, &bn, &bk, &alpha,
                  &buf[0, 0], &lda, &buf[0, 0], &ldb,
                  &beta, &covs[i, 0, 0], &ldc)
            for j in range(d):
                means[i, j] = mu[j]
    return means_arr, covs_arr
