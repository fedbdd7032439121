# cython: language_level=3
"""Compiled neighbour counting for the Kraskov estimator.

The k-th neighbour search is exhaustive in effect: candidates are visited
outward along the first coordinate and the scan stops once that coordinate's
gap alone reaches the current k-th best max-norm distance, which no
remaining candidate can beat.  Marginal counts use
binary search on each sorted column with the same floating-point predicate
``|x_j - x_i| < eps`` as the brute-force path, which is monotone along the
sorted order, so both paths return identical counts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef Py_ssize_t _first_not_below(const double[::1] col, Py_ssize_t lo, Py_ssize_t hi,
                                 double xi, double e) noexcept nogil:
    # first index in [lo, hi) with col[j] - xi >= e (col sorted, col[j] >= xi on the range)
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if col[mid] - xi < e:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef Py_ssize_t _first_within(const double[::1] col, Py_ssize_t lo, Py_ssize_t hi,
                              double xi, double e) noexcept nogil:
    # first index in [lo, hi) with xi - col[j] < e (col sorted, col[j] <= xi on the range)
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if xi - col[mid] < e:
            hi = mid
        else:
            lo = mid + 1
    return lo


def ksg_counts(double[:, ::1] X, int k):
    """k-th neighbour max-norm radius and strict marginal counts per sample.

    Returns ``(eps, counts)`` with ``eps`` of shape (N,) and ``counts`` of
    shape (N, n); the sample itself is never counted.
    """
    cdef Py_ssize_t N = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t i, j, c, p, pos, up, down, lo_eq, hi_eq, left, right
    cdef double d, diff, e, worst, xi
    eps_arr = np.empty(N, dtype=np.float64)
    cnt_arr = np.zeros((N, n), dtype=np.int64)
    buf_arr = np.empty(k, dtype=np.float64)
    sorted_arr = np.ascontiguousarray(np.sort(np.asarray(X), axis=0).T)
    cdef double[::1] eps = eps_arr
    cdef long long[:, ::1] cnt = cnt_arr
    cdef double[::1] buf = buf_arr
    cdef double[:, ::1] cols = sorted_arr
    cdef const double[::1] col
    order_arr = np.argsort(np.asarray(X)[:, 0], kind="stable").astype(np.intp)
    cdef Py_ssize_t[::1] order = order_arr

    with nogil:
        for p in range(N):
            i = order[p]
            for c in range(k):
                buf[c] = 1e308
            worst = 1e308
            # walk outward along the first coordinate; once the gap in that
            # coordinate alone reaches the k-th best distance, stop that side
            up = p + 1
            down = p - 1
            while up < N or down >= 0:
                if up < N and (down < 0 or X[order[up], 0] - X[i, 0] <= X[i, 0] - X[order[down], 0]):
                    j = order[up]
                    up += 1
                else:
                    j = order[down]
                    down -= 1
                if fabs(X[j, 0] - X[i, 0]) >= worst:
                    break
                d = 0.0
                for c in range(n):
                    diff = fabs(X[j, c] - X[i, c])
                    if diff > d:
                        d = diff
                        if d >= worst:
                            break
                if d < worst:
                    pos = k - 1
                    while pos > 0 and buf[pos - 1] > d:
                        buf[pos] = buf[pos - 1]
                        pos -= 1
                    buf[pos] = d
                    worst = buf[k - 1]
            eps[i] = worst

    for c in range(n):
        col = cols[c]
        with nogil:
            for i in range(N):
                xi = X[i, c]
                e = eps[i]
                # split point: first index with col[j] >= xi
                lo_eq = 0
                hi_eq = N
                while lo_eq < hi_eq:
                    pos = (lo_eq + hi_eq) >> 1
                    if col[pos] < xi:
                        lo_eq = pos + 1
                    else:
                        hi_eq = pos
                left = _first_within(col, 0, lo_eq, xi, e)
                right = _first_not_below(col, lo_eq, N, xi, e)
                # the sample itself sits inside the window whenever e > 0
                cnt[i, c] = right - left - (1 if e > 0.0 else 0)
    return eps_arr, cnt_arr
