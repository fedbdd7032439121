"""Linear ICA baseline: symmetric FastICA with the log-cosh contrast."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.decomposition import FastICA
from sklearn.exceptions import ConvergenceWarning

from ..errors import ParameterError, RankError, SampleSizeError

__all__ = ["FastIcaConfig", "FastIcaResult", "fastica_fit"]


@dataclass(frozen=True)
class FastIcaConfig:
    n_components: int
    max_iters: int = 200
    tol: float = 1e-4
    seed: int | None = None

    def __post_init__(self):
        if self.n_components < 1 or self.max_iters < 1 or self.tol <= 0:
            raise ParameterError("FastICA settings must be positive")


@dataclass
class FastIcaResult:
    latents: np.ndarray
    converged: bool
    n_iter: int
    contrast: str = "logcosh"


def fastica_fit(xs, cfg: FastIcaConfig) -> FastIcaResult:
    """Unmix the centered rows of ``xs`` into ``cfg.n_components`` sources.

    Whitening keeps the top eigen-directions of the sample covariance.  A
    run that hits ``max_iters`` returns its last iterate with
    ``converged=False`` instead of raising.
    """
    xs = np.asarray(xs, dtype=float)
    N, m = xs.shape
    if cfg.n_components > m:
        raise ParameterError(f"n_components={cfg.n_components} exceeds input dimension {m}")
    if N <= m:
        raise SampleSizeError(f"FastICA needs more samples than dimensions (N={N}, m={m})")
    xc = xs - xs.mean(axis=0)
    lam = np.linalg.eigvalsh(xc.T @ xc / (N - 1))[::-1]
    if not lam[cfg.n_components - 1] > 1e-12 * max(lam[0], 1e-300):
        raise RankError(
            f"centered covariance has fewer than {cfg.n_components} positive eigenvalues"
        )
    model = FastICA(
        n_components=cfg.n_components,
        algorithm="parallel",
        fun="logcosh",
        whiten="unit-variance",
        whiten_solver="eigh",
        max_iter=cfg.max_iters,
        tol=cfg.tol,
        random_state=cfg.seed,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        latents = model.fit_transform(xc)
    converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
    return FastIcaResult(latents=latents, converged=converged, n_iter=int(model.n_iter_))
