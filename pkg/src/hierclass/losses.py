"""Training losses ``l(y, theta)`` with closed-form gradients.

All value-and-gradient kernels are batched: ``y`` has shape ``(N,)`` and
``theta`` has shape ``(N, D)``; they return per-example losses ``(N,)`` and
gradients ``(N, D)``. The public single-example functions wrap the kernels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from .hierarchy import Hierarchy, random_cuts, sum_over_ancestors, sum_over_descendants
from .likelihoods import Method, embed_nonroot, nonroot_nodes, param_dim, sibling_log_softmax


def masked_logsumexp(z: np.ndarray, mask: np.ndarray):
    """Log-sum-exp over ``mask`` along the last axis and the matching softmax.

    Every row of ``mask`` must select at least one entry.
    """
    zm = np.where(mask, z, -np.inf)
    m = zm.max(axis=-1, keepdims=True)
    e = np.exp(zm - m)
    s = e.sum(axis=-1, keepdims=True)
    return (m + np.log(s))[..., 0], e / s


def _onehot(idx: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((len(idx), n))
    out[np.arange(len(idx)), idx] = 1.0
    return out


# --- kernels -----------------------------------------------------------------


def _flat_nll(h: Hierarchy, y, theta):
    under = h.is_ancestor(y[:, None], h.leaves[None, :])
    lse_all = np.logaddexp.reduce(theta, axis=-1)
    lse_y, sm_y = masked_logsumexp(theta, under)
    loss = lse_all - lse_y
    grad = softmax(theta, axis=-1) - sm_y
    return loss, grad


def _hxe(h: Hierarchy, y, theta, alpha):
    gamma = np.exp(-alpha)
    depth = h.depth[y]
    loss = np.zeros(len(y))
    grad = np.zeros_like(theta)
    # Telescoped form: sum_k c_k * lse(theta over L(omega_k)).
    for k in range(h.max_depth + 1):
        omega = h.ancestor_at_depth(y, k)
        active = (omega >= 0) & (depth > 0)
        if not active.any():
            continue
        c = np.where(k == 0, 1.0, np.where(k == depth, -gamma ** (k - 1.0),
                                           gamma ** float(k) - gamma ** (k - 1.0)))
        c = np.where(active, c, 0.0)
        node = np.where(active, omega, h.root)
        under = h.is_ancestor(node[:, None], h.leaves[None, :])
        lse, sm = masked_logsumexp(theta, under)
        loss += c * lse
        grad += c[:, None] * sm
    return loss, grad


def _multilabel_focal(h: Hierarchy, y, theta, alpha, gamma):
    nodes = nonroot_nodes(h)
    pos = h.is_ancestor(nodes[None, :], y[:, None])
    p = expit(theta)
    log_p = log_expit(theta)
    log_q = log_expit(-theta)
    q = expit(-theta)
    w_pos = np.exp(gamma * log_q)   # (1-p)^gamma
    w_neg = np.exp(gamma * log_p)   # p^gamma
    l_pos = -alpha * w_pos * log_p
    l_neg = -(1.0 - alpha) * w_neg * log_q
    g_pos = alpha * w_pos * (gamma * p * log_p - q)
    g_neg = (1.0 - alpha) * w_neg * (p - gamma * q * log_q)
    loss = np.where(pos, l_pos, l_neg).sum(-1)
    grad = np.where(pos, g_pos, g_neg)
    return loss, grad


def _cond_softmax_nll(h: Hierarchy, y, theta):
    nodes = nonroot_nodes(h)
    log_r = sibling_log_softmax(h, embed_nonroot(h, theta))[:, nodes]
    par = h.parent[nodes]
    on_path = h.is_ancestor(nodes[None, :], y[:, None])
    active = h.is_ancestor(par[None, :], y[:, None]) & (par[None, :] != y[:, None])
    loss = -np.where(on_path, log_r, 0.0).sum(-1)
    grad = np.where(active, np.exp(log_r), 0.0) - on_path
    return loss, grad


def _cond_sigmoid_bce(h: Hierarchy, y, theta):
    nodes = nonroot_nodes(h)
    target = h.is_ancestor(nodes[None, :], y[:, None])
    active = h.is_ancestor(h.parent[nodes][None, :], y[:, None])
    terms = np.where(target, -log_expit(theta), -log_expit(-theta))
    loss = np.where(active, terms, 0.0).sum(-1)
    grad = np.where(active, expit(theta) - target, 0.0)
    return loss, grad


def _deeprtc(h: Hierarchy, y, theta, p_cut, num_samples, rng):
    n = len(y)
    beta = sum_over_ancestors(h, theta)
    cuts = random_cuts(h, p_cut, rng, size=n * num_samples).reshape(n, num_samples, -1)
    nodes = np.arange(h.num_nodes)
    # Target mass is the unique cut node above y, or the cut nodes below an
    # internal label when the cut passes beneath it.
    related = h.is_ancestor(nodes[None, :], y[:, None]) | h.is_ancestor(y[:, None], nodes[None, :])
    target = cuts & related[:, None, :]
    b = np.broadcast_to(beta[:, None, :], cuts.shape)
    lse_k, sm_k = masked_logsumexp(b, cuts)
    lse_t, sm_t = masked_logsumexp(b, target)
    loss = (lse_k - lse_t).mean(-1)
    g_beta = (sm_k - sm_t).mean(1)
    grad = sum_over_descendants(h, g_beta)
    return loss, grad


def _soft_max_descendant(h: Hierarchy, y, theta):
    nodes = np.arange(h.num_nodes)
    loss = np.zeros(len(y))
    grad = np.zeros_like(theta)
    for k in range(1, h.max_depth + 1):
        # The root term is a softmax over {root} alone and contributes nothing.
        u = h.ancestor_at_depth(y, k)
        active = u >= 0
        if not active.any():
            continue
        u = np.where(active, u, h.root)
        related = h.is_ancestor(nodes[None, :], u[:, None]) | h.is_ancestor(u[:, None], nodes[None, :])
        mask = ~related | (nodes[None, :] == u[:, None])
        w = np.where(active, 1.0 / h.leaf_count[u], 0.0)
        lse, sm = masked_logsumexp(theta, mask)
        loss += w * (lse - theta[np.arange(len(y)), u])
        grad += w[:, None] * (sm - _onehot(u, h.num_nodes))
    return loss, grad


def _soft_max_margin(h: Hierarchy, y, theta, alpha):
    nodes = np.arange(h.num_nodes)
    correct = h.is_ancestor(nodes[None, :], y[:, None])
    z = theta + alpha * (~correct)
    log_sm = log_softmax(z, axis=-1)
    loss = -log_sm[np.arange(len(y)), y]
    grad = np.exp(log_sm) - _onehot(y, h.num_nodes)
    return loss, grad


# --- loss specifications -----------------------------------------------------


@dataclass(frozen=True)
class FlatNLL:
    """Negative log-likelihood of the flat softmax (cross-entropy for leaf labels)."""

    method: ClassVar[Method] = Method.FLAT_SOFTMAX
    name: ClassVar[str] = "flat_nll"

    def _kernel(self, h, y, theta, rng):
        return _flat_nll(h, y, theta)


@dataclass(frozen=True)
class HXE:
    """Hierarchical cross-entropy with discount ``gamma = exp(-alpha)``."""

    alpha: float = 0.0
    method: ClassVar[Method] = Method.FLAT_SOFTMAX
    name: ClassVar[str] = "hxe"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"HXE alpha must be >= 0, got {self.alpha}")

    @property
    def gamma(self) -> float:
        return float(np.exp(-self.alpha))

    def _kernel(self, h, y, theta, rng):
        return _hxe(h, y, theta, self.alpha)


@dataclass(frozen=True)
class MultilabelFocal:
    """Sum of per-node focal losses on independent sigmoids."""

    alpha: float = 0.9
    gamma: float = 1.0
    method: ClassVar[Method] = Method.MULTILABEL_SIGMOID
    name: ClassVar[str] = "multilabel_focal"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"focal alpha must lie in (0, 1), got {self.alpha}")
        if not self.gamma >= 0:
            raise ValueError(f"focal gamma must be >= 0, got {self.gamma}")

    def _kernel(self, h, y, theta, rng):
        return _multilabel_focal(h, y, theta, self.alpha, self.gamma)


@dataclass(frozen=True)
class CondSoftmaxNLL:
    method: ClassVar[Method] = Method.COND_SOFTMAX
    name: ClassVar[str] = "cond_softmax_nll"

    def _kernel(self, h, y, theta, rng):
        return _cond_softmax_nll(h, y, theta)


@dataclass(frozen=True)
class CondSigmoidBCE:
    method: ClassVar[Method] = Method.COND_SIGMOID
    name: ClassVar[str] = "cond_sigmoid_bce"

    def _kernel(self, h, y, theta, rng):
        return _cond_sigmoid_bce(h, y, theta)


@dataclass(frozen=True)
class DeepRTC:
    """Cross-entropy over random cuts of the tree, averaged over ``num_samples`` cuts.

    ``seed`` fixes the cuts when no generator is supplied, which makes the
    Monte Carlo estimate a deterministic function of ``theta``.
    """

    p_cut: float = 0.0
    num_samples: int = 1
    seed: int = 0
    method: ClassVar[Method] = Method.DEEPRTC
    name: ClassVar[str] = "deeprtc"

    def __post_init__(self):
        if not 0.0 <= self.p_cut <= 1.0:
            raise ValueError(f"p_cut must lie in [0, 1], got {self.p_cut}")
        if int(self.num_samples) < 1:
            raise ValueError("num_samples must be >= 1")

    def _kernel(self, h, y, theta, rng):
        if rng is None:
            rng = np.random.default_rng(self.seed)
        return _deeprtc(h, y, theta, self.p_cut, int(self.num_samples), rng)


@dataclass(frozen=True)
class SoftMaxDescendant:
    method: ClassVar[Method] = Method.EXCLUSIVE_SOFTMAX
    name: ClassVar[str] = "soft_max_descendant"

    def _kernel(self, h, y, theta, rng):
        return _soft_max_descendant(h, y, theta)


@dataclass(frozen=True)
class SoftMaxMargin:
    """Soft structured-hinge loss with margin ``alpha * (1 - Correct(y, .))``."""

    alpha: float = 5.0
    method: ClassVar[Method] = Method.EXCLUSIVE_SOFTMAX
    name: ClassVar[str] = "soft_max_margin"

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"margin alpha must be >= 0, got {self.alpha}")

    def _kernel(self, h, y, theta, rng):
        return _soft_max_margin(h, y, theta, self.alpha)


LOSSES = {cls.name: cls for cls in (FlatNLL, HXE, MultilabelFocal, CondSoftmaxNLL,
                                    CondSigmoidBCE, DeepRTC, SoftMaxDescendant, SoftMaxMargin)}

# Methods whose parameter vector each loss can train.
COMPATIBLE = {
    "flat_nll": {Method.FLAT_SOFTMAX},
    "hxe": {Method.FLAT_SOFTMAX},
    "multilabel_focal": {Method.MULTILABEL_SIGMOID},
    "cond_softmax_nll": {Method.COND_SOFTMAX},
    "cond_sigmoid_bce": {Method.COND_SIGMOID},
    "deeprtc": {Method.DEEPRTC, Method.PS_SOFTMAX},
    "soft_max_descendant": {Method.EXCLUSIVE_SOFTMAX},
    "soft_max_margin": {Method.EXCLUSIVE_SOFTMAX},
}


def make_loss(name: str, **params):
    try:
        cls = LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; valid: {', '.join(LOSSES)}") from None
    return cls(**params)


def loss_value_and_grad(spec, h: Hierarchy, y, theta, rng=None):
    """Loss and gradient with respect to ``theta``.

    Scalar ``y`` with 1-d ``theta`` gives a float and a vector; an array of
    labels with a matrix of scores gives per-example losses and gradients.
    ``rng`` overrides the seed of stochastic losses.
    """
    theta = np.asarray(theta, dtype=float)
    single = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=np.intp))
    th = theta[None, :] if single else theta
    dim = param_dim(h, spec.method)
    if th.ndim != 2 or th.shape[1] != dim:
        raise ValueError(f"{spec.name} expects theta of dimension {dim}, got shape {theta.shape}")
    if th.shape[0] != len(y):
        raise ValueError(f"{len(y)} labels but {th.shape[0]} score rows")
    if not np.isfinite(th).all():
        raise ValueError("theta contains non-finite values")
    if ((y < 0) | (y >= h.num_nodes)).any():
        raise IndexError("label out of range")
    loss, grad = spec._kernel(h, y, th, rng)
    if single:
        return float(loss[0]), grad[0]
    return loss, grad


def loss_value(spec, h: Hierarchy, y, theta, rng=None):
    return loss_value_and_grad(spec, h, y, theta, rng)[0]


def flat_nll(h, y, theta):
    return loss_value(FlatNLL(), h, y, theta)


def hxe(h, y, theta, alpha=0.0):
    return loss_value(HXE(alpha), h, y, theta)


def multilabel_focal(h, y, theta, alpha=0.9, gamma=1.0):
    return loss_value(MultilabelFocal(alpha, gamma), h, y, theta)


def cond_softmax_nll(h, y, theta):
    return loss_value(CondSoftmaxNLL(), h, y, theta)


def cond_sigmoid_bce(h, y, theta):
    return loss_value(CondSigmoidBCE(), h, y, theta)


def deeprtc_loss(h, y, theta, p_cut=0.0, num_samples=1, rng_seed=0):
    return loss_value(DeepRTC(p_cut, num_samples, rng_seed), h, y, theta)


def soft_max_descendant(h, y, theta):
    return loss_value(SoftMaxDescendant(), h, y, theta)


def soft_max_margin(h, y, theta, alpha=5.0):
    return loss_value(SoftMaxMargin(alpha), h, y, theta)
