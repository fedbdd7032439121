"""Coordinate tensors of a Riemannian metric and their derivatives.

Points and tangent components are plain 1-D float arrays.  A metric is a
:class:`MetricField`, a callable returning the SPD component matrix at a
point, optionally carrying analytic Christoffel and Ricci providers.  Every
derivative has a central-difference fallback so arbitrary metrics work.

Christoffel symbols are stored as ``gamma[k, i, j]`` for Gamma^k_{ij}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import linalg as sla
from scipy.special import logsumexp

from .errors import DomainError, LinAlgError, ParameterError

__all__ = [
    "MetricField",
    "ScalarField",
    "RicciResult",
    "fd_step",
    "metric_at",
    "christoffel",
    "christoffel_derivative",
    "ricci",
    "covariant_hessian",
    "log_hausdorff_density",
    "transform_02",
    "symmetrize",
    "euclidean_metric",
    "conformal_metric",
    "pullback_blend_metric",
    "anchor_score_metric",
    "anchor_weights",
]


def fd_step(x) -> float:
    """Step for first differences of the metric: 1e-4 * (1 + |x|_inf)."""
    return 1e-4 * (1.0 + float(np.max(np.abs(x), initial=0.0)))


def _hess_step(x) -> float:
    # fourth-order stencils on scalar fields tolerate (and want) a larger step
    return 1e-3 * (1.0 + float(np.max(np.abs(x), initial=0.0)))


def symmetrize(t):
    t = np.asarray(t, dtype=float)
    return 0.5 * (t + t.T)


@dataclass(frozen=True)
class MetricField:
    """A field of SPD matrices over a chart.

    ``metric_fn(x)`` returns the n x n component matrix.  ``domain_fn``, when
    given, raises :class:`DomainError` for points outside the chart.
    """

    dim: int
    metric_fn: Callable[[np.ndarray], np.ndarray]
    christoffel_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ricci_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain_fn: Optional[Callable[[np.ndarray], None]] = None
    name: str = "metric"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.domain_fn is not None:
            self.domain_fn(x)
        return np.asarray(self.metric_fn(x), dtype=float)


@dataclass(frozen=True)
class ScalarField:
    """A log-density (or any smooth scalar) with optional analytic derivatives."""

    log_value_fn: Callable[[np.ndarray], float]
    gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def log_value(self, x) -> float:
        return float(self.log_value_fn(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient_fn is not None:
            return np.asarray(self.gradient_fn(x), dtype=float)
        return fd_gradient(self.log_value_fn, x)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hessian_fn is not None:
            return symmetrize(self.hessian_fn(x))
        if self.gradient_fn is not None:
            return symmetrize(fd_jacobian(self.gradient_fn, x, _hess_step(x)))
        return fd_hessian(self.log_value_fn, x)


_C1 = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


def fd_gradient(f, x, h=None):
    """Fourth-order central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = _hess_step(x) if h is None else h
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = sum(c * f(x + a * e) for a, c in _C1) / h
    return g


def fd_jacobian(f, x, h):
    """Central-difference Jacobian, column l holds d f / d x_l."""
    x = np.asarray(x, dtype=float)
    cols = []
    for l in range(x.size):
        e = np.zeros_like(x)
        e[l] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def fd_hessian(f, x, h=None):
    """Fourth-order central-difference Hessian from function values only."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _hess_step(x) if h is None else h
    H = np.zeros((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (
            -f(x + 2 * ei) + 16 * f(x + ei) - 30 * f0 + 16 * f(x - ei) - f(x - 2 * ei)
        ) / (12.0 * h * h)
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h
            acc = 0.0
            for a, ca in _C1:
                for b, cb in _C1:
                    acc += ca * cb * f(x + a * ei + b * ej)
            H[i, j] = H[j, i] = acc / (h * h)
    return H


def metric_at(m: MetricField, x) -> np.ndarray:
    """Metric components at ``x``, validated symmetric positive definite."""
    g = m(x)
    if not np.all(np.isfinite(g)):
        raise LinAlgError(f"{m.name}: non-finite metric at {x}")
    if np.max(np.abs(g - g.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(g))):
        raise LinAlgError(f"{m.name}: metric is not symmetric at {x}")
    g = symmetrize(g)
    if np.linalg.eigvalsh(g)[0] <= 0.0:
        raise LinAlgError(f"{m.name}: metric is not positive definite at {x}")
    return g


def _cho(g):
    try:
        return sla.cho_factor(g)
    except np.linalg.LinAlgError as exc:
        raise LinAlgError(f"metric is singular or indefinite: {exc}") from exc


def _fd_metric_grad(m: MetricField, x, h):
    # dg[l, i, j] = d g_ij / d x^l
    n = x.size
    dg = np.empty((n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        dg[l] = (m(x + e) - m(x - e)) / (2.0 * h)
    return dg


def christoffel(m: MetricField, x, step=None, analytic=True) -> np.ndarray:
    """Christoffel symbols ``gamma[k, i, j]`` of the Levi-Civita connection.

    Uses the analytic provider when present (and ``analytic`` is true),
    otherwise central differences of the metric with the given step.
    """
    x = np.asarray(x, dtype=float)
    if analytic and m.christoffel_fn is not None:
        if m.domain_fn is not None:
            m.domain_fn(x)
        gamma = np.asarray(m.christoffel_fn(x), dtype=float)
    else:
        h = fd_step(x) if step is None else step
        g = m(x)
        dg = _fd_metric_grad(m, x, h)
        # lowered symbols Gamma_{ijm} = 1/2 (d_j g_im + d_i g_jm - d_m g_ij)
        lowered = 0.5 * (
            dg.transpose(1, 0, 2) + dg - dg.transpose(1, 2, 0)
        )
        cf = _cho(g)
        n = x.size
        gamma = sla.cho_solve(cf, lowered.reshape(n * n, n).T).reshape(n, n, n)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel_derivative(m: MetricField, x, step=None, analytic=True) -> np.ndarray:
    """``dgamma[l, k, i, j]`` = d Gamma^k_ij / d x^l by central differences."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x) if step is None else step
    n = x.size
    out = np.empty((n, n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = h
        out[l] = (
            christoffel(m, x + e, h, analytic) - christoffel(m, x - e, h, analytic)
        ) / (2.0 * h)
    return out


class RicciResult(NamedTuple):
    ric: np.ndarray
    asymmetry: float  # max |Ric - Ric^T| before symmetrization


def _ricci_from(gamma, dgamma):
    t1 = np.einsum("kkij->ij", dgamma)
    t2 = np.einsum("jkik->ij", dgamma)
    t3 = np.einsum("aab,bij->ij", gamma, gamma)
    t4 = np.einsum("aib,baj->ij", gamma, gamma)
    return t1 - t2 + t3 - t4


def ricci(m: MetricField, x, step=None, analytic=True) -> RicciResult:
    """Ricci tensor components at ``x``.

    With ``analytic=False`` every provider is ignored and the result comes
    purely from nested central differences of the metric.
    """
    x = np.asarray(x, dtype=float)
    if analytic and m.ricci_fn is not None:
        if m.domain_fn is not None:
            m.domain_fn(x)
        raw = np.asarray(m.ricci_fn(x), dtype=float)
    else:
        gamma = christoffel(m, x, step, analytic)
        dgamma = christoffel_derivative(m, x, step, analytic)
        raw = _ricci_from(gamma, dgamma)
    asym = float(np.max(np.abs(raw - raw.T), initial=0.0))
    return RicciResult(symmetrize(raw), asym)


def covariant_hessian(f: ScalarField, m: MetricField, x, step=None) -> np.ndarray:
    """(nabla^2 f)_ij = d_i d_j f - Gamma^k_ij d_k f."""
    x = np.asarray(x, dtype=float)
    gamma = christoffel(m, x, step)
    H = f.hessian(x) - np.einsum("kij,k->ij", gamma, f.gradient(x))
    return symmetrize(H)


def log_hausdorff_density(f: ScalarField, m: MetricField, x) -> float:
    """log p(x) - 1/2 log det g(x)."""
    sign, logdet = np.linalg.slogdet(m(x))
    if sign <= 0:
        raise LinAlgError("metric determinant is not positive")
    return f.log_value(x) - 0.5 * logdet


def transform_02(t, jac) -> np.ndarray:
    """Pull a (0,2)-tensor back through a coordinate Jacobian: jac^T t jac."""
    jac = np.asarray(jac, dtype=float)
    return jac.T @ np.asarray(t, dtype=float) @ jac


def euclidean_metric(n: int) -> MetricField:
    zeros3 = np.zeros((n, n, n))
    zeros2 = np.zeros((n, n))
    eye = np.eye(n)
    return MetricField(
        dim=n,
        metric_fn=lambda x: eye.copy(),
        christoffel_fn=lambda x: zeros3.copy(),
        ricci_fn=lambda x: zeros2.copy(),
        name="euclidean",
    )


def conformal_metric(n, log_factor, log_factor_grad, curvature=None, domain_fn=None, name="conformal"):
    """Metric ``exp(2 phi(x)) I`` with phi = ``log_factor``.

    Christoffel symbols follow from phi's gradient in closed form.  When the
    metric has constant sectional curvature, pass it to get analytic Ricci
    ``(n - 1) K g``.
    """
    eye = np.eye(n)

    def metric_fn(x):
        return np.exp(2.0 * log_factor(x)) * eye

    def christoffel_fn(x):
        d = log_factor_grad(x)
        # delta^k_i d_j phi + delta^k_j d_i phi - delta_ij d_k phi
        return (
            np.einsum("ki,j->kij", eye, d)
            + np.einsum("kj,i->kij", eye, d)
            - np.einsum("ij,k->kij", eye, d)
        )

    ricci_fn = None
    if curvature is not None:
        def ricci_fn(x):
            return (n - 1) * curvature * metric_fn(x)

    return MetricField(
        dim=n,
        metric_fn=metric_fn,
        christoffel_fn=christoffel_fn,
        ricci_fn=ricci_fn,
        domain_fn=domain_fn,
        name=name,
    )


def pullback_blend_metric(encoder_jacobian, lam: float, dim: int) -> MetricField:
    """(1 - lam) I + lam J(x)^T J(x): full rank for any encoder Jacobian."""
    if not 0.0 < lam < 1.0:
        raise ParameterError(f"blend weight must lie in (0, 1), got {lam}")
    eye = np.eye(dim)

    def metric_fn(x):
        J = np.atleast_2d(np.asarray(encoder_jacobian(x), dtype=float))
        if J.shape[1] != dim:
            raise ParameterError(f"encoder Jacobian has {J.shape[1]} columns, expected {dim}")
        return (1.0 - lam) * eye + lam * (J.T @ J)

    return MetricField(dim=dim, metric_fn=metric_fn, name="pullback-blend")


def anchor_weights(x, anchors, bandwidth) -> np.ndarray:
    """Gaussian softmax weights of ``x`` against the anchor points."""
    d2 = np.sum((np.asarray(anchors) - np.asarray(x)) ** 2, axis=1)
    logits = -d2 / (2.0 * bandwidth**2)
    return np.exp(logits - logsumexp(logits))


def anchor_score_metric(anchors, scores, alpha2: float, bandwidth: float) -> MetricField:
    """I + alpha^2 * sum_m w_m(x) s_m s_m^T with softmax anchor weights."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if anchors.size == 0 or anchors.shape[0] == 0:
        raise ParameterError("anchor list is empty")
    if anchors.shape != scores.shape:
        raise ParameterError(f"anchors {anchors.shape} and scores {scores.shape} differ in shape")
    if alpha2 <= 0 or bandwidth <= 0:
        raise ParameterError("alpha2 and bandwidth must be positive")
    n = anchors.shape[1]
    outer = np.einsum("mi,mj->mij", scores, scores)
    eye = np.eye(n)

    def metric_fn(x):
        w = anchor_weights(x, anchors, bandwidth)
        return eye + alpha2 * np.einsum("m,mij->ij", w, outer)

    return MetricField(dim=n, metric_fn=metric_fn, name="anchor-score")


def check_finite_point(x, what="point"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{what} has non-finite entries")
    return x
