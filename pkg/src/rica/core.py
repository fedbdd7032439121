"""Disentanglement tensor, its g-orthogonal diagonalization, and latent recovery.

The tensor is D = Hess_cov(log rho) - Ric/3 where rho is the density with
respect to the Riemannian volume.  In data coordinates it is assembled from
the metric, its Christoffel symbols and their first derivatives.  A
g-orthonormal frame J that diagonalizes D (a generalized symmetric
eigenproblem on the pencil (D, g)) orients a normal-coordinate chart whose
latent log-likelihood has a diagonal Hessian at the base point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import EvaluationError, FrameError, LinAlgError
from .geodesics import exp_map, generic_exp_ode, log_map_batch
from .geometry import (
    MetricField,
    ScalarField,
    christoffel,
    christoffel_derivative,
    fd_hessian,
    fd_jacobian,
    log_hausdorff_density,
    symmetrize,
    transform_02,
)
from .manifolds import ManifoldSpec

__all__ = [
    "Frame",
    "DisentanglementMatrix",
    "EigenResult",
    "FRAME_TOL",
    "disentanglement_tensor",
    "disentanglement_tensor_shortcut",
    "to_normal",
    "rica_diagonalize",
    "rica_recover",
    "pointwise_cov_check",
    "pointwise_hessian_check",
]

FRAME_TOL = 1e-8


@dataclass(frozen=True)
class Frame:
    """Columns of ``j`` are a g-orthonormal tangent basis at ``at``.

    ``g`` is the metric at ``at``; it gives the left inverse ``j^T g``.
    """

    j: np.ndarray
    at: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "at", np.asarray(self.at, dtype=float))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        res = self.residual()
        if not res < FRAME_TOL:
            raise FrameError(f"frame is not g-orthogonal (residual {res:.3e})")

    def residual(self) -> float:
        n = self.j.shape[1]
        return float(np.max(np.abs(self.j.T @ self.g @ self.j - np.eye(n))))

    @property
    def inverse(self) -> np.ndarray:
        return self.j.T @ self.g

    @classmethod
    def from_metric(cls, m: MetricField, x0, j):
        return cls(j, x0, m(x0))


@dataclass(frozen=True)
class DisentanglementMatrix:
    d: np.ndarray
    at: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d", symmetrize(self.d))
        object.__setattr__(self, "at", np.asarray(self.at, dtype=float))


@dataclass(frozen=True)
class EigenResult:
    frame: Frame
    lambdas: np.ndarray
    min_adjacent_gap: float
    metric_condition: float = field(default=float("nan"))


def disentanglement_tensor(
    p: ScalarField,
    m: MetricField,
    x0,
    step=None,
    curvature_correction: bool = True,
) -> DisentanglementMatrix:
    """Coordinate components of D at ``x0``.

    With ``curvature_correction=False`` the -Ric/3 term is dropped and the
    result is the covariant Hessian of the log Hausdorff density.
    """
    x0 = np.asarray(x0, dtype=float)
    gamma = christoffel(m, x0, step)
    dgamma = christoffel_derivative(m, x0, step)
    # Gamma^a_{ai} = 1/2 d_i log det g
    grad_logdet = 2.0 * np.einsum("aak->k", gamma)
    hess_logdet = symmetrize(2.0 * np.einsum("jaai->ij", dgamma))

    c = 1.0 / 3.0 if curvature_correction else 0.5
    grad_r = p.gradient(x0) - c * grad_logdet
    hess_r = p.hessian(x0) - c * hess_logdet
    D = hess_r - np.einsum("kij,k->ij", gamma, grad_r)
    if curvature_correction:
        D = D - np.einsum("aaij->ij", dgamma) / 3.0
        D = D + np.einsum("aib,baj->ij", gamma, gamma) / 3.0
    if not np.all(np.isfinite(D)):
        raise EvaluationError("disentanglement tensor is not finite")
    return DisentanglementMatrix(D, x0)


def disentanglement_tensor_shortcut(frame: Frame, d_s0) -> DisentanglementMatrix:
    """Data-coordinate tensor from its normal-coordinate value: J^-T D_s J^-1."""
    jinv = frame.inverse
    return DisentanglementMatrix(jinv.T @ np.asarray(d_s0, dtype=float) @ jinv, frame.at)


def to_normal(d: DisentanglementMatrix, frame: Frame) -> np.ndarray:
    return symmetrize(transform_02(d.d, frame.j))


def _fix_signs(J):
    idx = np.argmax(np.abs(J), axis=0)
    signs = np.sign(J[idx, np.arange(J.shape[1])])
    signs[signs == 0] = 1.0
    return J * signs


def rica_diagonalize(d: DisentanglementMatrix, m: MetricField | np.ndarray) -> EigenResult:
    """Solve the pencil (D, g) for a g-orthonormal frame diagonalizing D.

    Eigenvalues ascend; each frame column is signed so that its
    largest-magnitude entry is positive.
    """
    g = m(d.at) if isinstance(m, MetricField) else np.asarray(m, dtype=float)
    g = symmetrize(g)
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise LinAlgError(f"metric is not positive definite at the base point: {exc}") from exc
    Y = sla.solve_triangular(L, d.d, lower=True)
    B = symmetrize(sla.solve_triangular(L, Y.T, lower=True))
    lam, Q = np.linalg.eigh(B)
    J = _fix_signs(sla.solve_triangular(L.T, Q, lower=False))
    gaps = np.diff(lam)
    min_gap = float(np.min(gaps)) if gaps.size else float("inf")
    return EigenResult(
        frame=Frame(J, d.at, g),
        lambdas=lam,
        min_adjacent_gap=min_gap,
        metric_condition=float(np.linalg.cond(g)),
    )


def rica_recover(spec: ManifoldSpec, x0, frame: Frame, xs):
    """Latents J^T g(x0) log_{x0}(x) for every row of ``xs``.

    Returns ``(latents, ok)``.  Rows whose log map fails (cut locus, outside
    the chart) are NaN with ``ok`` False; the rest are unaffected.
    """
    V, ok = log_map_batch(spec, x0, xs)
    return V @ frame.inverse.T, ok


def pointwise_cov_check(p: ScalarField, m: MetricField, x0, frame: Frame):
    """Both sides of log p_s(0) = log p_x(x0) + log|det J| = log rho(x0)."""
    lp = p.log_value(x0)
    _, logabsdet = np.linalg.slogdet(frame.j)
    lhs = lp + logabsdet
    rhs = log_hausdorff_density(p, m, x0)
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        raise EvaluationError("density is not finite at the base point")
    return lhs, rhs


def pointwise_hessian_check(
    p: ScalarField,
    m: MetricField,
    x0,
    frame: Frame,
    spec: ManifoldSpec | None = None,
    curvature_correction: bool = True,
    outer_step: float = 1e-3,
    inner_step: float = 1e-5,
) -> float:
    """Max deviation between the numeric latent Hessian and J^T D J.

    The latent log-density is evaluated through its definition,
    log p_s(s) = log rho(x(s)) + 1/2 log det g_s(s) with x(s) = exp_{x0}(J s)
    and g_s the metric pulled back through a numeric Jacobian of that map.
    Geodesics use the closed forms when ``spec`` is given, RK4 otherwise.
    """
    x0 = np.asarray(x0, dtype=float)
    J = frame.j

    if spec is not None:
        def chart(s):
            return exp_map(spec, x0, J @ s)
    else:
        def chart(s):
            return generic_exp_ode(m, x0, J @ s)

    def log_ps(s):
        x = chart(s)
        jac = fd_jacobian(chart, s, inner_step)
        g_s = transform_02(m(x), jac)
        _, logdet_s = np.linalg.slogdet(g_s)
        return log_hausdorff_density(p, m, x) + 0.5 * logdet_s

    numeric = fd_hessian(log_ps, np.zeros(J.shape[1]), outer_step)
    D = disentanglement_tensor(p, m, x0, curvature_correction=curvature_correction)
    return float(np.max(np.abs(numeric - to_normal(D, frame))))
