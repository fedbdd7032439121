"""Conformal nonlinear-ICA baseline: a stack of Mobius layers trained by maximum likelihood.

One layer maps ``s -> alpha * O (s - a) / |s - a|^2 + b``: a sphere inversion
about ``a`` followed by scaling, rotation and translation.  The raw
parameters are unconstrained and mapped to

* ``alpha = exp(4 tanh(eta))`` in ``[e^-4, e^4]``
* ``O = expm(A - A^T)``, orthogonal
* ``a = 2 sqrt(n) a_raw / |a_raw|`` and likewise ``b``

The encoder used for training and recovery is the forward composition
``h = f_L o ... o f_1``; the class is closed under inversion, so this is
the same model family as inverting a generative flow.  Gradients of the
negative log-likelihood are accumulated in reverse through each layer's
closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, PoleError, TrainingError
from ..sources import logistic_logpdf

__all__ = [
    "POLE_GUARD",
    "MobiusFlowParams",
    "TrainConfig",
    "NlicaResult",
    "init_params",
    "mobius_forward",
    "mobius_inverse",
    "layer_logdet",
    "forward_logdet",
    "nll_and_grad",
    "nlica_fit",
    "reduce_dimension",
]

POLE_GUARD = 1e-12


@dataclass
class MobiusFlowParams:
    """Raw parameters stacked over layers: eta (L,), skew (L, n, n), a_raw/b_raw (L, n)."""

    eta: np.ndarray
    skew: np.ndarray
    a_raw: np.ndarray
    b_raw: np.ndarray

    @property
    def n_layers(self) -> int:
        return int(self.eta.shape[0])

    @property
    def dim(self) -> int:
        return int(self.a_raw.shape[1])

    def alphas(self):
        return np.exp(4.0 * np.tanh(self.eta))

    def rotations(self):
        return _skew_expm(self.skew)[0]

    def _anchor(self, raw):
        radius = 2.0 * math.sqrt(self.dim)
        return radius * raw / np.linalg.norm(raw, axis=1, keepdims=True)

    def centres(self):
        return self._anchor(self.a_raw)

    def offsets(self):
        return self._anchor(self.b_raw)

    def derived(self):
        return self.alphas(), self.rotations(), self.centres(), self.offsets()

    def blocks(self):
        return [self.eta, self.skew, self.a_raw, self.b_raw]

    def copy(self):
        return MobiusFlowParams(*(np.array(x, copy=True) for x in self.blocks()))


def _skew_expm(A):
    """expm(A - A^T) for a stack of matrices, plus the eigen data for its adjoint.

    The generator S is skew, so i S is Hermitian: S = V diag(i theta) V^H.
    """
    S = A - np.swapaxes(A, -1, -2)
    theta, V = np.linalg.eigh(1j * S)
    lam = -1j * theta
    E = np.exp(lam)
    O = np.einsum("...ik,...k,...jk->...ij", V, E, V.conj()).real
    return O, (lam, V, E)


def _skew_expm_adjoint(eig, G):
    """Gradient with respect to A of <G, expm(A - A^T)> from the eigen data."""
    lam, V, E = eig
    dl = lam[..., :, None] - lam[..., None, :]
    small = np.abs(dl) < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        F = np.where(small, E[..., :, None], (E[..., :, None] - E[..., None, :]) / np.where(small, 1.0, dl))
    Vh = np.swapaxes(V.conj(), -1, -2)
    # adjoint of the Frechet derivative at S is the derivative at S^T = S^H
    inner = Vh @ G @ V * F.conj()
    gS = (V @ inner @ Vh).real
    return gS - np.swapaxes(gS, -1, -2)


def init_params(n: int, n_layers: int, rng: np.random.Generator) -> MobiusFlowParams:
    """alpha = 1, O = I, random unit directions for the centre and offset."""
    return MobiusFlowParams(
        eta=np.zeros(n_layers),
        skew=np.zeros((n_layers, n, n)),
        a_raw=rng.standard_normal((n_layers, n)),
        b_raw=rng.standard_normal((n_layers, n)),
    )


def _layer(y, alpha, O, a, b):
    d = y - a
    q = np.sum(d * d, axis=-1, keepdims=True)
    # callers test q against the pole guard; rows at a pole may divide by zero here
    with np.errstate(divide="ignore", invalid="ignore"):
        return alpha * (d / q) @ O.T + b, d, q


def _check_pole(q, what):
    if np.any(q < POLE_GUARD**2):
        raise PoleError(f"{what} is within {POLE_GUARD:g} of a layer pole")


def _layers(params):
    """Derived (alpha, O, a, b) per layer from raw params or an explicit list of them."""
    if isinstance(params, MobiusFlowParams):
        return list(zip(*params.derived()))
    return [(float(al), np.asarray(O, float), np.asarray(a, float), np.asarray(b, float))
            for al, O, a, b in params]


def mobius_forward(params, s):
    """Apply every layer in order; ``s`` may be (n,) or (N, n).

    ``params`` is a :class:`MobiusFlowParams` or a sequence of derived
    ``(alpha, O, a, b)`` tuples.
    """
    y = np.asarray(s, dtype=float)
    for alpha, O, a, b in _layers(params):
        y_next, _, q = _layer(y, alpha, O, a, b)
        _check_pole(q, "input")
        y = y_next
    return y


def mobius_inverse(params, x):
    """Undo the layers in reverse: w = O^T (x - b) / alpha, s = a + w / |w|^2."""
    y = np.asarray(x, dtype=float)
    for alpha, O, a, b in reversed(_layers(params)):
        w = (y - b) @ O / alpha
        q = np.sum(w * w, axis=-1, keepdims=True)
        _check_pole(q, "intermediate value")
        y = a + w / q
    return y


def layer_logdet(alpha, a, s):
    """log |det| of one layer's Jacobian: n log(alpha) - 2n log|s - a|."""
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    return n * math.log(alpha) - n * np.log(np.sum((s - a) ** 2, axis=-1))


def forward_logdet(params, s):
    """Output of the full stack and the summed log |det Jacobian|."""
    y = np.asarray(s, dtype=float)
    total = np.zeros(y.shape[:-1])
    for alpha, O, a, b in _layers(params):
        total = total + layer_logdet(alpha, a, y)
        y = _layer(y, alpha, O, a, b)[0]
    return y, total


def _prior_terms(h, scales):
    logp = np.sum(logistic_logpdf(h, scales), axis=-1)
    score = -np.tanh(h / (2.0 * scales)) / scales
    return logp, score


def nll_and_grad(params: MobiusFlowParams, x, scales):
    """Mean negative log-likelihood of ``x`` under encoder + logistic prior, and its gradient.

    Returns ``(loss, grads, bad)`` where ``grads`` mirrors ``params.blocks()``
    and ``bad`` flags rows that came within the pole guard (those rows are
    excluded from both loss and gradient; the caller resamples them).
    """
    scales = np.asarray(scales, dtype=float)
    rots, eig = _skew_expm(params.skew)
    alphas, cs, bs = params.alphas(), params.centres(), params.offsets()
    L, n = params.n_layers, params.dim
    y = np.asarray(x, dtype=float)
    B = y.shape[0]
    bad = np.zeros(B, dtype=bool)
    cache = []
    for l in range(L):
        y_next, d, q = _layer(y, alphas[l], rots[l], cs[l], bs[l])
        bad |= q[:, 0] < POLE_GUARD**2
        cache.append((d, q))
        y = y_next
    keep = ~bad
    nb = int(keep.sum())
    if nb == 0:
        return float("nan"), None, bad
    logp, score = _prior_terms(y[keep], scales)
    logdet = np.zeros(nb)
    for l, (d, q) in enumerate(cache):
        logdet += n * math.log(alphas[l]) - n * np.log(q[keep, 0])
    loss = -float(np.mean(logp + logdet))

    g_alpha = np.zeros(L)
    g_O = np.zeros((L, n, n))
    g_a = np.zeros((L, n))
    g_b = np.zeros((L, n))
    G = np.zeros_like(y)
    G[keep] = -score / nb
    w = keep[:, None] / nb
    for l in range(L - 1, -1, -1):
        d, q = cache[l]
        alpha, O = alphas[l], rots[l]
        u = d / q
        g_b[l] = G.sum(axis=0)
        g_alpha[l] = float(np.sum(G * (u @ O.T))) - n / alpha  # logdet contributes -n log(alpha)
        g_O[l] = alpha * G.T @ u
        Gu = alpha * G @ O
        Gd = (Gu - 2.0 * np.sum(Gu * d, axis=1, keepdims=True) * d / q) / q
        Gd += w * 2.0 * n * d / q  # from +n log q in the loss
        G = Gd
        g_a[l] = -Gd.sum(axis=0)

    t = np.tanh(params.eta)
    g_eta = g_alpha * alphas * 4.0 * (1.0 - t * t)
    g_skew = _skew_expm_adjoint(eig, g_O)
    return loss, [g_eta, g_skew, _anchor_grad(params.a_raw, g_a), _anchor_grad(params.b_raw, g_b)], bad


def _anchor_grad(raw, g):
    """Chain rule through raw -> 2 sqrt(n) raw / |raw|, row-wise."""
    r = np.linalg.norm(raw, axis=-1, keepdims=True)
    unit = raw / r
    radius = 2.0 * math.sqrt(raw.shape[-1])
    return radius / r * (g - unit * np.sum(unit * g, axis=-1, keepdims=True))


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    batch: int = 128
    lr: float = 1e-3
    weight_decay: float = 1e-4
    prior_scales: tuple = ()
    n_layers: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.steps < 0 or self.batch < 1 or self.lr <= 0 or self.weight_decay < 0:
            raise ParameterError("training settings must be positive")
        if self.n_layers < 0:
            raise ParameterError("n_layers must be non-negative")
        if any(not s > 0 for s in self.prior_scales):
            raise ParameterError("prior scales must be positive")


@dataclass
class NlicaResult:
    latents: np.ndarray
    params: MobiusFlowParams
    losses: np.ndarray
    reduction: str
    resampled: int = 0
    ok: np.ndarray = field(default=None)


def reduce_dimension(xs, n):
    """Center, then project onto the top-n principal directions when m > n."""
    xs = np.asarray(xs, dtype=float)
    xc = xs - xs.mean(axis=0)
    m = xs.shape[1]
    if m == n:
        return xc, "center"
    if m < n:
        raise ParameterError(f"input dimension {m} is below the latent dimension {n}")
    _, vecs = np.linalg.eigh(xc.T @ xc)
    return xc @ vecs[:, ::-1][:, :n], f"center+pca{m}->{n}"


def nlica_fit(xs, cfg: TrainConfig, rng: np.random.Generator) -> NlicaResult:
    """Train the Mobius encoder with AdamW on minibatches and encode all rows.

    Batch rows that hit a pole are replaced by fresh draws.  Rows of the
    final encoding that hit a pole are NaN with ``ok`` False.
    """
    scales = np.asarray(cfg.prior_scales, dtype=float)
    n = scales.shape[0]
    if n == 0:
        raise ParameterError("prior_scales must give one scale per latent")
    z, reduction = reduce_dimension(xs, n)
    N = z.shape[0]
    params = init_params(n, cfg.n_layers, rng)
    m1 = [np.zeros_like(p) for p in params.blocks()]
    m2 = [np.zeros_like(p) for p in params.blocks()]
    losses = np.empty(cfg.steps)
    resampled = 0
    for step in range(cfg.steps):
        idx = rng.integers(0, N, cfg.batch)
        for _ in range(10):
            loss, grads, bad = nll_and_grad(params, z[idx], scales)
            if not bad.any():
                break
            resampled += int(bad.sum())
            idx[bad] = rng.integers(0, N, int(bad.sum()))
        if grads is None or not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}", step)
        losses[step] = loss
        t = step + 1
        c1 = 1.0 - cfg.beta1**t
        c2 = 1.0 - cfg.beta2**t
        for p, g, mo, v in zip(params.blocks(), grads, m1, m2):
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient at step {step}", step)
            mo *= cfg.beta1
            mo += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p *= 1.0 - cfg.lr * cfg.weight_decay
            p -= cfg.lr * (mo / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
    latents = np.full_like(z, np.nan)
    ok = np.zeros(N, dtype=bool)
    alphas, rots, cs, bs = params.derived()
    y = z
    good = np.ones(N, dtype=bool)
    for l in range(cfg.n_layers):
        y, _, q = _layer(y, alphas[l], rots[l], cs[l], bs[l])
        good &= q[:, 0] >= POLE_GUARD**2
    latents[good] = y[good]
    ok[good] = True
    return NlicaResult(latents, params, losses, reduction, resampled, ok)
