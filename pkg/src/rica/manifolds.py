"""The four closed-form geometries used in the source-recovery experiments.

Each manifold has an intrinsic chart (where RICA runs) and an alternate
chart (an embedding or re-parameterization handed to the baselines):

==========  ===============  ===============
manifold    intrinsic        alternate
==========  ===============  ===============
sphere      stereographic    ambient
hyperbolic  poincare         lorentz
torus       angle            sincos
spd         log-euclidean    vech
==========  ===============  ===============

SPD(p) points are stored through ``x = vech(log P)`` in the scaled basis
(diagonal weight 1, off-diagonal weight 1/sqrt(2)), so ``g(0) = I``.
"""
from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .geometry import MetricField, conformal_metric, euclidean_metric

__all__ = [
    "KINDS",
    "ManifoldSpec",
    "ChartId",
    "POINCARE_MARGIN",
    "intrinsic_metric",
    "base_point",
    "alternate_chart",
    "chart_coordinates",
    "charts_for",
    "parse_chart",
    "table_rows",
    "wrap_angle",
    "vech",
    "unvech",
    "vech_basis",
    "sym_expm",
    "sym_logm",
    "spd_point",
    "spd_coords",
    "expm_frechet_sym",
]

KINDS = ("sphere", "hyperbolic", "torus", "spd")
POINCARE_MARGIN = 1e-9

_CHARTS = {
    # (intrinsic, alternate); table order lists the alternate chart first
    # for sphere and hyperbolic, the intrinsic chart first for torus and SPD.
    "sphere": ("stereographic", "ambient"),
    "hyperbolic": ("poincare", "lorentz"),
    "torus": ("angle", "sincos"),
    "spd": ("log-euclidean", "vech"),
}
_TABLE_ORDER = (
    ("sphere", "ambient"),
    ("sphere", "stereographic"),
    ("hyperbolic", "lorentz"),
    ("hyperbolic", "poincare"),
    ("torus", "angle"),
    ("torus", "sincos"),
    ("spd", "log-euclidean"),
    ("spd", "vech"),
)


def _canon(name: str) -> str:
    s = unicodedata.normalize("NFKD", name).encode("ascii", "ignore").decode()
    return s.strip().lower().replace("_", "-").replace(" ", "-")


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    dim: int
    p: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown manifold {self.kind!r}; expected one of {KINDS}")
        if self.kind == "spd":
            if self.p is None or self.p * (self.p + 1) // 2 != self.dim:
                raise ParameterError("SPD spec needs p with dim = p(p+1)/2")
        if self.dim < 1:
            raise ParameterError("dimension must be positive")

    @classmethod
    def sphere(cls, n):
        return cls("sphere", n)

    @classmethod
    def hyperbolic(cls, n):
        return cls("hyperbolic", n)

    @classmethod
    def torus(cls, n):
        return cls("torus", n)

    @classmethod
    def spd(cls, p):
        return cls("spd", p * (p + 1) // 2, p)

    @classmethod
    def for_target(cls, kind, n_target):
        """Spec at a target intrinsic dimension.

        SPD takes the smallest p with p(p+1)/2 >= n_target (8 -> p=4, 32 -> p=8).
        """
        kind = _canon(kind)
        if kind == "spd":
            p = 1
            while p * (p + 1) // 2 < n_target:
                p += 1
            return cls.spd(p)
        return cls(kind, n_target)


@dataclass(frozen=True)
class ChartId:
    tag: str  # "intrinsic" or "alternate"
    name: str


def charts_for(kind) -> tuple[ChartId, ChartId]:
    intr, alt = _CHARTS[kind]
    return ChartId("intrinsic", intr), ChartId("alternate", alt)


def parse_chart(kind, name) -> ChartId:
    name = _canon(name)
    for chart in charts_for(kind):
        if chart.name == name:
            return chart
    raise ParameterError(f"chart {name!r} does not belong to manifold {kind!r}")


def table_rows(n_target: int = 8) -> list[tuple[ManifoldSpec, ChartId]]:
    """The eight (manifold, chart) rows in table order."""
    rows = []
    for kind, chart in _TABLE_ORDER:
        rows.append((ManifoldSpec.for_target(kind, n_target), parse_chart(kind, chart)))
    return rows


def wrap_angle(x):
    """Wrap to (-pi, pi]; +pi stays, -pi maps to +pi."""
    x = np.asarray(x, dtype=float)
    inside = (x > -np.pi) & (x <= np.pi)
    return np.where(inside, x, np.pi - np.mod(np.pi - x, 2.0 * np.pi))


# -- SPD helpers ------------------------------------------------------------

def _vech_index(p):
    return [(i, j) for j in range(p) for i in range(j, p)]


def vech_basis(p) -> np.ndarray:
    """Scaled basis matrices E_k, shape (n, p, p)."""
    idx = _vech_index(p)
    B = np.zeros((len(idx), p, p))
    r = 1.0 / math.sqrt(2.0)
    for k, (i, j) in enumerate(idx):
        if i == j:
            B[k, i, i] = 1.0
        else:
            B[k, i, j] = B[k, j, i] = r
    return B


def vech(S) -> np.ndarray:
    """Scaled half-vectorization; batched over leading axes."""
    S = np.asarray(S, dtype=float)
    p = S.shape[-1]
    idx = _vech_index(p)
    rows = np.array([i for i, _ in idx])
    cols = np.array([j for _, j in idx])
    w = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return S[..., rows, cols] * w


def unvech(x, p=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if p is None:
        p = int(round((math.sqrt(8 * n + 1) - 1) / 2))
    return np.einsum("...k,kij->...ij", x, vech_basis(p))


def _sym_eig(S):
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    return np.linalg.eigh(S)


def sym_expm(S):
    lam, U = _sym_eig(np.asarray(S, dtype=float))
    return np.einsum("...ik,...k,...jk->...ij", U, np.exp(lam), U)


def sym_logm(P):
    lam, U = _sym_eig(np.asarray(P, dtype=float))
    if np.any(lam <= 0.0):
        raise DomainError("matrix logarithm needs a positive definite argument")
    lam = np.maximum(lam, 1e-300)
    return np.einsum("...ik,...k,...jk->...ij", U, np.log(lam), U)


def spd_point(x):
    """P(x) = expm(unvech(x))."""
    return sym_expm(unvech(x))


def spd_coords(P):
    return vech(sym_logm(P))


def _exp_divided_differences(lam):
    # F_kl = (e^lk - e^ll) / (lk - ll), e^lk on the diagonal
    dk = lam[:, None] - lam[None, :]
    el = np.exp(lam)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        F = el * np.expm1(dk) / dk
    small = np.abs(dk) < 1e-12
    mid = np.exp(0.5 * (lam[:, None] + lam[None, :]))
    return np.where(small, mid, F)


def expm_frechet_sym(S, E):
    """Directional derivative of expm at symmetric S along symmetric E."""
    lam, U = _sym_eig(np.asarray(S, dtype=float))
    F = _exp_divided_differences(lam)
    return U @ (F * (U.T @ E @ U)) @ U.T


def _spd_metric(p):
    B = vech_basis(p)

    def metric_fn(x):
        lam, U = _sym_eig(unvech(x, p))
        F = _exp_divided_differences(lam)
        # tr(P^-1 E_i P^-1 E_j) in the eigenbasis of log P
        W = np.exp(-lam)[:, None] * np.exp(-lam)[None, :] * F * F
        Bt = np.einsum("ak,nab,bl->nkl", U, B, U)
        g = np.einsum("ikl,jkl,kl->ij", Bt, Bt, W)
        return 0.5 * (g + g.T)

    return metric_fn


# -- public operations ------------------------------------------------------

def _poincare_domain(x):
    r2 = np.sum(np.asarray(x) ** 2, axis=-1)
    if np.any(np.sqrt(r2) >= 1.0 - POINCARE_MARGIN):
        raise DomainError(f"Poincare ball needs |x| < 1 - {POINCARE_MARGIN:g}")


def intrinsic_metric(spec: ManifoldSpec) -> MetricField:
    n = spec.dim
    if spec.kind == "sphere":
        return conformal_metric(
            n,
            lambda x: math.log(2.0) - math.log1p(float(x @ x)),
            lambda x: -2.0 * x / (1.0 + float(x @ x)),
            curvature=1.0,
            name="sphere-stereographic",
        )
    if spec.kind == "hyperbolic":
        return conformal_metric(
            n,
            lambda x: math.log(2.0) - math.log1p(-float(x @ x)),
            lambda x: 2.0 * x / (1.0 - float(x @ x)),
            curvature=-1.0,
            domain_fn=_poincare_domain,
            name="hyperbolic-poincare",
        )
    if spec.kind == "torus":
        m = euclidean_metric(n)
        return MetricField(
            dim=n,
            metric_fn=m.metric_fn,
            christoffel_fn=m.christoffel_fn,
            ricci_fn=m.ricci_fn,
            name="torus-angle",
        )
    return MetricField(dim=n, metric_fn=_spd_metric(spec.p), name="spd-log-euclidean")


def base_point(spec: ManifoldSpec) -> np.ndarray:
    return np.zeros(spec.dim)


def alternate_chart(spec: ManifoldSpec, x) -> np.ndarray:
    """Map intrinsic coordinates (shape (n,) or (N, n)) to the alternate chart."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "sphere":
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return np.concatenate([2.0 * x / (1.0 + r2), (r2 - 1.0) / (1.0 + r2)], axis=-1)
    if spec.kind == "hyperbolic":
        _poincare_domain(x)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return np.concatenate([2.0 * x / (1.0 - r2), (1.0 + r2) / (1.0 - r2)], axis=-1)
    if spec.kind == "torus":
        out = np.empty(x.shape[:-1] + (2 * x.shape[-1],))
        out[..., 0::2] = np.sin(x)
        out[..., 1::2] = np.cos(x)
        return out
    return vech(spd_point(x))


def chart_coordinates(spec: ManifoldSpec, chart: ChartId, x) -> np.ndarray:
    if chart.tag == "intrinsic":
        return np.asarray(x, dtype=float)
    return alternate_chart(spec, x)
