"""Exponential and logarithmic maps.

The four built-in manifolds get closed forms (vectorized over rows when the base
point is the chart origin).  Anything else goes through RK4 integration of
the geodesic equation and Newton shooting on top of it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, IntegrationError, ParameterError, RadiusError
from .geometry import MetricField, christoffel
from .manifolds import (
    ManifoldSpec,
    POINCARE_MARGIN,
    expm_frechet_sym,
    intrinsic_metric,
    spd_coords,
    sym_expm,
    sym_logm,
    unvech,
    vech,
    wrap_angle,
    _exp_divided_differences,
    _sym_eig,
)

__all__ = [
    "GeodesicSolverConfig",
    "exp_map",
    "log_map",
    "log_map_batch",
    "log_map_logabsdet",
    "generic_exp_ode",
    "geodesic_trajectory",
    "generic_log_shoot",
    "injectivity_radius",
    "within_radius",
]


@dataclass(frozen=True)
class GeodesicSolverConfig:
    rk4_steps: int = 100
    shooting_max_iters: int = 50
    shooting_tol: float = 1e-10

    def __post_init__(self):
        if self.rk4_steps < 1 or self.shooting_max_iters < 1 or self.shooting_tol <= 0:
            raise ParameterError("solver settings must be positive")


def injectivity_radius(spec: ManifoldSpec) -> float:
    if spec.kind in ("sphere", "torus"):
        return math.pi
    return math.inf


def within_radius(spec: ManifoldSpec, x0, v) -> np.ndarray:
    """Row-wise test that tangent ``v`` at ``x0`` stays inside the injectivity radius.

    The torus test is per coordinate (|v_i| < pi), the cube on which the
    angle-chart exponential is injective.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if spec.kind == "torus":
        return np.max(np.abs(v), axis=1) < math.pi
    if spec.kind == "sphere":
        g = intrinsic_metric(spec)(np.asarray(x0, dtype=float))
        gnorm = np.sqrt(np.einsum("ni,ij,nj->n", v, g, v))
        return gnorm < math.pi
    return np.ones(v.shape[0], dtype=bool)


def _ratio(f, r):
    # f(r)/r with the r -> 0 limit of 1 (f = tan, tanh, arctan, artanh)
    out = np.ones_like(r)
    nz = r > 0
    out[nz] = f(r[nz]) / r[nz]
    return out


def _is_origin(x0):
    return not np.any(np.asarray(x0, dtype=float))


def _exp0(spec, V):
    if spec.kind == "sphere":
        r = np.linalg.norm(V, axis=1)
        with np.errstate(over="ignore", invalid="ignore"):
            return V * _ratio(np.tan, r)[:, None]
    if spec.kind == "hyperbolic":
        r = np.linalg.norm(V, axis=1)
        return V * _ratio(np.tanh, r)[:, None]
    if spec.kind == "torus":
        return wrap_angle(V)
    # the log-Euclidean chart is normal at P0 = I
    return V.copy()


def _log0(spec, X):
    """Row-wise log at the origin; returns (V, ok) with NaN rows where it fails."""
    X = np.asarray(X, dtype=float)
    ok = np.all(np.isfinite(X), axis=1)
    V = np.full_like(X, np.nan)
    Xo = X[ok]
    if spec.kind == "sphere":
        r = np.linalg.norm(Xo, axis=1)
        V[ok] = Xo * _ratio(np.arctan, r)[:, None]
    elif spec.kind == "hyperbolic":
        r = np.linalg.norm(Xo, axis=1)
        inside = r < 1.0 - POINCARE_MARGIN
        out = np.full_like(Xo, np.nan)
        out[inside] = Xo[inside] * _ratio(np.arctanh, r[inside])[:, None]
        V[ok] = out
        ok[ok] = inside
    elif spec.kind == "torus":
        d = wrap_angle(Xo)
        tie = np.any(np.abs(d) >= math.pi, axis=1)
        d[tie] = np.nan
        V[ok] = d
        ok[ok] = ~tie
    else:
        V[ok] = Xo
    return V, ok


def _spd_exp(x0, v):
    S0 = unvech(x0)
    P0 = sym_expm(S0)
    lam, U = _sym_eig(P0)
    half = U @ np.diag(np.sqrt(lam)) @ U.T
    ihalf = U @ np.diag(1.0 / np.sqrt(lam)) @ U.T
    Vm = expm_frechet_sym(S0, unvech(v))
    P = half @ sym_expm(ihalf @ Vm @ ihalf) @ half
    return spd_coords(P)


def _spd_log(x0, x):
    S0 = unvech(x0)
    P0 = sym_expm(S0)
    lam, U = _sym_eig(P0)
    half = U @ np.diag(np.sqrt(lam)) @ U.T
    ihalf = U @ np.diag(1.0 / np.sqrt(lam)) @ U.T
    Q = sym_expm(unvech(x))
    Vm = half @ sym_logm(ihalf @ Q @ ihalf) @ half
    # invert the differential of expm at S0 to get chart components
    mu, W = _sym_eig(S0)
    F = _exp_divided_differences(mu)
    return vech(W @ ((W.T @ Vm @ W) / F) @ W.T)


def exp_map(spec: ManifoldSpec, x0, v, cfg: GeodesicSolverConfig | None = None) -> np.ndarray:
    """exp_{x0}(v); ``v`` may be one tangent (n,) or a batch (N, n)."""
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    if _is_origin(x0):
        X = _exp0(spec, V)
    elif spec.kind == "torus":
        X = wrap_angle(x0 + V)
    elif spec.kind == "spd":
        X = np.array([_spd_exp(x0, row) for row in V])
    else:
        m = intrinsic_metric(spec)
        cfg = cfg or GeodesicSolverConfig()
        X = np.array([generic_exp_ode(m, x0, row, cfg) for row in V])
    return X[0] if single else X


def log_map_batch(spec: ManifoldSpec, x0, X, cfg: GeodesicSolverConfig | None = None):
    """Row-wise log map.  Returns ``(V, ok)``; failed rows are NaN with ok False."""
    x0 = np.asarray(x0, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if _is_origin(x0):
        return _log0(spec, X)
    V = np.full_like(X, np.nan)
    ok = np.zeros(X.shape[0], dtype=bool)
    for i, x in enumerate(X):
        try:
            V[i] = log_map(spec, x0, x, cfg)
            ok[i] = True
        except (RadiusError, ConvergenceError, IntegrationError, ValueError):
            pass
    return V, ok


def log_map(spec: ManifoldSpec, x0, x, cfg: GeodesicSolverConfig | None = None) -> np.ndarray:
    """log_{x0}(x) for a single point; raises :class:`RadiusError` at the cut locus."""
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    if spec.kind == "torus":
        d = wrap_angle(x - x0)
        if np.any(np.abs(d) >= math.pi):
            raise RadiusError("torus log map is ambiguous at a half-period difference")
        return d
    if _is_origin(x0):
        V, ok = _log0(spec, x[None, :])
        if not ok[0]:
            raise RadiusError(f"{spec.kind}: point has no log map from the base point")
        return V[0]
    if spec.kind == "spd":
        return _spd_log(x0, x)
    m = intrinsic_metric(spec)
    if spec.kind == "hyperbolic":
        m.domain_fn(x)
    return generic_log_shoot(m, x0, x, cfg or GeodesicSolverConfig())


def log_map_logabsdet(spec: ManifoldSpec, X) -> np.ndarray:
    """log |det d log_0(x) / dx| for rows of X (base point at the origin)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    r = np.linalg.norm(X, axis=1)
    if spec.kind == "sphere":
        # radial map x -> arctan(r) x / r
        return -np.log1p(r * r) + (n - 1) * np.log(_ratio(np.arctan, r))
    if spec.kind == "hyperbolic":
        return -np.log1p(-r * r) + (n - 1) * np.log(_ratio(np.arctanh, r))
    return np.zeros(X.shape[0])


# -- generic ODE path ---------------------------------------------------------

def _accel(m, x, u):
    gamma = christoffel(m, x)
    return -np.einsum("kij,i,j->k", gamma, u, u)


def geodesic_trajectory(m: MetricField, x0, v, cfg: GeodesicSolverConfig | None = None):
    """RK4 states over t in [0, 1]; returns ``(ts, xs, us)``."""
    cfg = cfg or GeodesicSolverConfig()
    x = np.array(x0, dtype=float)
    u = np.array(v, dtype=float)
    steps = cfg.rk4_steps
    h = 1.0 / steps
    xs = [x.copy()]
    us = [u.copy()]
    for step in range(steps):
        try:
            k1x, k1u = u, _accel(m, x, u)
            k2x, k2u = u + 0.5 * h * k1u, _accel(m, x + 0.5 * h * k1x, u + 0.5 * h * k1u)
            k3x, k3u = u + 0.5 * h * k2u, _accel(m, x + 0.5 * h * k2x, u + 0.5 * h * k2u)
            k4x, k4u = u + h * k3u, _accel(m, x + h * k3x, u + h * k3u)
        except ValueError as exc:
            raise IntegrationError(f"geodesic left the chart at step {step}: {exc}", step) from exc
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise IntegrationError(f"non-finite geodesic state at step {step}", step)
        xs.append(x.copy())
        us.append(u.copy())
    return np.linspace(0.0, 1.0, steps + 1), np.array(xs), np.array(us)


def generic_exp_ode(m: MetricField, x0, v, cfg: GeodesicSolverConfig | None = None) -> np.ndarray:
    """Endpoint of the geodesic x'' + Gamma(x)[x', x'] = 0 at t = 1."""
    _, xs, _ = geodesic_trajectory(m, x0, v, cfg)
    return xs[-1]


def generic_log_shoot(m: MetricField, x0, x, cfg: GeodesicSolverConfig | None = None) -> np.ndarray:
    """Newton shooting on v -> exp_ode(v) - x, starting from the chart difference."""
    cfg = cfg or GeodesicSolverConfig()
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    v = x - x0
    resid = np.inf
    for _ in range(cfg.shooting_max_iters + 1):
        r = generic_exp_ode(m, x0, v, cfg) - x
        resid = float(np.max(np.abs(r)))
        if resid <= cfg.shooting_tol:
            return v
        h = 1e-6 * (1.0 + float(np.max(np.abs(v))))
        n = v.size
        jac = np.empty((n, n))
        for l in range(n):
            e = np.zeros(n)
            e[l] = h
            jac[:, l] = (
                generic_exp_ode(m, x0, v + e, cfg) - generic_exp_ode(m, x0, v - e, cfg)
            ) / (2.0 * h)
        v = v - np.linalg.solve(jac, r)
    raise ConvergenceError(
        f"log shooting did not converge in {cfg.shooting_max_iters} iterations", resid
    )
