"""Tangent-source generative model.

Sources are independent logistic variables with geometrically decaying
scales b_i = b * r_s**(i-1).  Observations are x = exp_{x0}(J s) for a random
g-orthonormal frame J at the base point.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Frame
from .errors import FrameError, ParameterError
from .geodesics import exp_map, log_map_batch, log_map_logabsdet, within_radius
from .geometry import MetricField, ScalarField
from .manifolds import (
    POINCARE_MARGIN,
    ChartId,
    ManifoldSpec,
    base_point,
    chart_coordinates,
)

__all__ = [
    "SourceConfig",
    "SourceBatch",
    "logistic_logpdf",
    "sample_logistic_sources",
    "random_g_frame",
    "generate",
    "chart_observations",
    "ground_truth_spectrum",
    "latent_hessian",
    "tangent_source_density",
]


@dataclass(frozen=True)
class SourceConfig:
    n: int
    b: float = 0.3
    r_s: float = 0.85
    N: int = 5000

    def __post_init__(self):
        if self.b <= 0:
            raise ParameterError("base scale b must be positive")
        if not 0 < self.r_s <= 1:
            raise ParameterError("decay r_s must lie in (0, 1]")
        if self.N < 1 or self.n < 1:
            raise ParameterError("n and N must be positive")

    @property
    def scales(self) -> np.ndarray:
        return self.b * self.r_s ** np.arange(self.n)


@dataclass
class SourceBatch:
    s: np.ndarray
    x: np.ndarray
    in_radius: np.ndarray
    z: Optional[np.ndarray] = None


def logistic_logpdf(s, scale):
    """Log density of Logistic(0, scale), stable in both tails."""
    u = np.asarray(s, dtype=float) / (2.0 * scale)
    return -np.log(scale) - 2.0 * np.logaddexp(u, -u)


def sample_logistic_sources(cfg: SourceConfig, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((cfg.N, cfg.n))
    while True:
        bad = u == 0.0
        if not bad.any():
            break
        u[bad] = rng.random(int(bad.sum()))
    return cfg.scales * (np.log(u) - np.log1p(-u))


def random_g_frame(m: MetricField, x0, rng: np.random.Generator) -> Frame:
    """J = M (M^T g M)^(-1/2) for a Gaussian matrix M.

    With g = L L^T and L^T M = U S V^T this equals L^-T U V^T, which is how it
    is evaluated: the polar factor avoids squaring the condition number of M.
    """
    g = m(x0)
    n = g.shape[0]
    L = np.linalg.cholesky(0.5 * (g + g.T))
    for _ in range(2):
        M = rng.standard_normal((n, n))
        U, sv, Vt = np.linalg.svd(L.T @ M)
        if sv[-1] > 1e-6 * sv[0]:
            J = np.linalg.solve(L.T, U @ Vt)
            return Frame(J, x0, g)
    raise FrameError("random frame draw was rank deficient twice")


def generate(
    spec: ManifoldSpec,
    cfg: SourceConfig,
    frame: Frame,
    rng: np.random.Generator,
    chart: ChartId | None = None,
) -> SourceBatch:
    """Paired sources and observations; ``z`` holds ``chart`` coordinates when given.

    Rows whose observation leaves the chart domain (a Poincare point
    numerically on the boundary) get NaN alternate coordinates.
    """
    x0 = base_point(spec)
    s = sample_logistic_sources(cfg, rng)
    V = s @ frame.j.T
    x = exp_map(spec, x0, V)
    in_radius = within_radius(spec, x0, V)
    z = None if chart is None else chart_observations(spec, chart, x)
    return SourceBatch(s=s, x=x, in_radius=in_radius, z=z)


def chart_observations(spec: ManifoldSpec, chart: ChartId, x) -> np.ndarray:
    """Coordinates of intrinsic points in ``chart``; NaN rows where undefined."""
    x = np.asarray(x, dtype=float)
    if chart.tag == "intrinsic":
        return x.copy()
    finite = np.all(np.isfinite(x), axis=1)
    if spec.kind == "hyperbolic":
        finite &= np.linalg.norm(np.where(np.isfinite(x), x, 0.0), axis=1) < 1.0 - POINCARE_MARGIN
    width = chart_coordinates(spec, chart, base_point(spec)).shape[0]
    z = np.full((x.shape[0], width), np.nan)
    z[finite] = chart_coordinates(spec, chart, x[finite])
    return z


def latent_hessian(cfg: SourceConfig) -> np.ndarray:
    """Hessian of the logistic product log-density at 0: diag(-1 / (2 b_i^2))."""
    return np.diag(-0.5 / cfg.scales**2)


def ground_truth_spectrum(cfg: SourceConfig):
    """Sorted eigenvalues of the normal-coordinate tensor and their smallest gap."""
    lam = np.sort(np.diag(latent_hessian(cfg)))
    gaps = np.diff(lam)
    return lam, (float(np.min(np.abs(gaps))) if gaps.size else float("inf"))


def tangent_source_density(spec: ManifoldSpec, frame: Frame, cfg: SourceConfig) -> ScalarField:
    """Exact data log-density of the generative model near the base point.

    log p_x(x) = sum_i log Logistic(s_i; b_i) + log|det J^-1| + log|det d log_0/dx|
    with s = J^-1 log_0(x).
    """
    scales = cfg.scales
    jinv = frame.inverse
    _, logdet_jinv = np.linalg.slogdet(jinv)

    def log_value(x):
        V, ok = log_map_batch(spec, base_point(spec), x[None, :])
        if not ok[0]:
            return -np.inf
        s = jinv @ V[0]
        return float(
            np.sum(logistic_logpdf(s, scales)) + logdet_jinv + log_map_logabsdet(spec, x)[0]
        )

    return ScalarField(log_value)

