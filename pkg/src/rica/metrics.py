"""Recovery scores: mean correlation coefficient and Kraskov total correlation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .errors import DomainError, EvaluationError, SampleSizeError

__all__ = ["MccReport", "TcReport", "mcc", "total_correlation", "digamma"]


@dataclass(frozen=True)
class MccReport:
    mcc: float
    permutation: np.ndarray  # permutation[i] = recovered column matched to true column i
    signs: np.ndarray
    corr_matrix: np.ndarray


@dataclass(frozen=True)
class TcReport:
    tc_nats: float
    k: int
    n_samples: int
    variant: str = "ksg-1"
    jittered: bool = False


def digamma(x):
    """Digamma for positive arguments (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("digamma is only defined here for x > 0")
    out = special.digamma(arr)
    return float(out) if np.ndim(out) == 0 else out


def _corr(a, b):
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    na = np.sqrt(np.sum(a * a, axis=0))
    nb = np.sqrt(np.sum(b * b, axis=0))
    c = a.T @ b
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(denom > 0, c / np.where(denom > 0, denom, 1.0), 0.0)
    # |corr| within round-off of 1 is snapped, so an exact signed permutation
    # scores exactly 1 regardless of summation order
    c = np.where(np.abs(c) > 1.0 - 1e-14, np.sign(c), c)
    return np.clip(c, -1.0, 1.0)


def mcc(s_true, s_hat) -> MccReport:
    """Mean matched |Pearson correlation| under the best permutation.

    Zero-variance columns correlate 0 with everything.
    """
    s_true = np.asarray(s_true, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    if s_true.shape != s_hat.shape or s_true.ndim != 2:
        raise SampleSizeError(f"shape mismatch: {s_true.shape} vs {s_hat.shape}")
    if s_true.shape[0] < 3:
        raise SampleSizeError("MCC needs at least 3 samples")
    if not (np.all(np.isfinite(s_true)) and np.all(np.isfinite(s_hat))):
        raise EvaluationError("MCC inputs contain non-finite values")
    c = _corr(s_true, s_hat)
    rows, cols = linear_sum_assignment(1.0 - np.abs(c))
    matched = c[rows, cols]
    signs = np.where(matched < 0, -1, 1)
    return MccReport(
        mcc=float(np.mean(np.abs(matched))),
        permutation=cols.astype(int),
        signs=signs.astype(int),
        corr_matrix=c,
    )


def total_correlation(s_hat, k: int = 3, rng: np.random.Generator | None = None) -> TcReport:
    """Kraskov (algorithm 1) multi-information estimate in nats.

    Columns are standardized first so the joint max-norm is not dominated by
    one coordinate; the population quantity is scale invariant.  If any
    k-th neighbour radius is zero (duplicated points) the data get uniform
    jitter at 1e-10 scale and ``jittered`` is set.
    """
    X = np.asarray(s_hat, dtype=float)
    if X.ndim != 2:
        raise SampleSizeError("expected an N x n matrix")
    N, n = X.shape
    if k < 1:
        raise DomainError("k must be at least 1")
    if N <= k + 1:
        raise SampleSizeError(f"need N > k + 1 samples, got N={N}, k={k}")
    if not np.all(np.isfinite(X)):
        raise EvaluationError("TC input contains non-finite values")
    sd = X.std(axis=0)
    X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    eps, counts = _kernels.ksg_counts(np.ascontiguousarray(X), k)
    jittered = False
    if np.any(eps <= 0):
        rng = rng if rng is not None else np.random.default_rng(0)
        X = X + rng.uniform(-1e-10, 1e-10, size=X.shape)
        eps, counts = _kernels.ksg_counts(np.ascontiguousarray(X), k)
        jittered = True
    tc = digamma(k) + (n - 1) * digamma(N) - float(np.mean(np.sum(digamma(counts + 1.0), axis=1)))
    if not np.isfinite(tc):
        raise EvaluationError("TC estimate is not finite")
    return TcReport(tc_nats=float(tc), k=k, n_samples=N, jittered=jittered)
