"""Pure numpy neighbour counting; same contract and results as the compiled kernel."""
import numpy as np

_CHUNK = 256


def ksg_counts(X, k):
    X = np.ascontiguousarray(X, dtype=np.float64)
    N, n = X.shape
    eps = np.empty(N)
    cnt = np.zeros((N, n), dtype=np.int64)
    for lo in range(0, N, _CHUNK):
        hi = min(lo + _CHUNK, N)
        diff = np.abs(X[None, :, :] - X[lo:hi, None, :])  # (chunk, N, n)
        dist = diff.max(axis=2)
        rows = np.arange(hi - lo)
        dist[rows, lo + rows] = np.inf
        e = np.partition(dist, k - 1, axis=1)[:, k - 1]
        eps[lo:hi] = e
        inside = diff < e[:, None, None]
        inside[rows, lo + rows, :] = False
        cnt[lo:hi] = inside.sum(axis=1)
    return eps, cnt
