"""Parametrisations ``q(theta)`` mapping raw scores to per-node likelihoods.

Every function accepts ``theta`` with shape ``(..., param_dim)`` and returns
``(..., |Y|)``. Parameter layouts:

* leaf-only vectors (flat softmax) list leaves in ascending node index;
* root-omitted vectors (conditional softmax/sigmoid, multi-label) list the
  non-root nodes in ascending node index;
* full vectors (Deep RTC, PS softmax, exclusive softmax) use node index.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from .hierarchy import Hierarchy, sum_over_ancestors, sum_over_children, sum_over_descendants

VALID_TOL = 1e-9


class InvalidLikelihoodError(ValueError):
    """Likelihood vector violates ``p(u) >= sum of p over children of u``."""


class Validity(str, enum.Enum):
    SUMS_TO_ONE = "sums-to-one-over-leaves"   # also parent >= children-sum
    PARENT_GE_CHILDREN_SUM = "parent>=children-sum"
    PARENT_GE_EACH_CHILD = "parent>=each-child"
    NONE = "none"


class Method(str, enum.Enum):
    FLAT_SOFTMAX = "flat_softmax"
    COND_SOFTMAX = "cond_softmax"
    COND_SIGMOID = "cond_sigmoid"
    MULTILABEL_SIGMOID = "multilabel_sigmoid"
    DEEPRTC = "deeprtc"
    PS_SOFTMAX = "ps_softmax"
    EXCLUSIVE_SOFTMAX = "exclusive_softmax"

    @classmethod
    def parse(cls, name) -> Method:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown method {name!r}; valid: {valid}") from None

    @property
    def validity(self) -> Validity:
        return _VALIDITY[self]

    @property
    def root_is_one(self) -> bool:
        return self is not Method.DEEPRTC


_VALIDITY = {
    Method.FLAT_SOFTMAX: Validity.SUMS_TO_ONE,
    Method.COND_SOFTMAX: Validity.SUMS_TO_ONE,
    Method.PS_SOFTMAX: Validity.SUMS_TO_ONE,
    Method.COND_SIGMOID: Validity.PARENT_GE_EACH_CHILD,
    Method.EXCLUSIVE_SOFTMAX: Validity.PARENT_GE_CHILDREN_SUM,
    Method.MULTILABEL_SIGMOID: Validity.NONE,
    Method.DEEPRTC: Validity.NONE,
}


def param_dim(h: Hierarchy, method) -> int:
    method = Method.parse(method)
    if method is Method.FLAT_SOFTMAX:
        return h.num_leaves
    if method in (Method.COND_SOFTMAX, Method.COND_SIGMOID, Method.MULTILABEL_SIGMOID):
        return h.num_nodes - 1
    return h.num_nodes


def _theta(h: Hierarchy, theta, dim: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0 or theta.shape[-1] != dim:
        raise ValueError(f"expected parameter dimension {dim}, got {np.shape(theta)[-1:]}")
    return theta


def nonroot_nodes(h: Hierarchy) -> np.ndarray:
    return np.flatnonzero(np.arange(h.num_nodes) != h.root)


def embed_nonroot(h: Hierarchy, theta, fill: float = 0.0) -> np.ndarray:
    """Scatter a root-omitted vector into a full ``|Y|`` vector."""
    out = np.full(theta.shape[:-1] + (h.num_nodes,), fill)
    out[..., nonroot_nodes(h)] = theta
    return out


def embed_leaves(h: Hierarchy, values) -> np.ndarray:
    out = np.zeros(values.shape[:-1] + (h.num_nodes,))
    out[..., h.leaves] = values
    return out


def sibling_log_softmax(h: Hierarchy, theta_full: np.ndarray) -> np.ndarray:
    """Log-softmax of ``theta`` within each sibling group; 0 at the root."""
    nonroot = nonroot_nodes(h)
    par = h.parent[nonroot]
    vals = theta_full[..., nonroot]
    lead = theta_full.shape[:-1]
    gmax = np.full(lead + (h.num_nodes,), -np.inf)
    np.maximum.at(gmax, (Ellipsis, par), vals)
    gsum = np.zeros(lead + (h.num_nodes,))
    np.add.at(gsum, (Ellipsis, par), np.exp(vals - gmax[..., par]))
    out = np.zeros_like(theta_full)
    out[..., nonroot] = vals - gmax[..., par] - np.log(gsum[..., par])
    return out


def flat_softmax_likelihood(h: Hierarchy, theta) -> np.ndarray:
    theta = _theta(h, theta, h.num_leaves)
    return sum_over_descendants(h, embed_leaves(h, softmax(theta, axis=-1)))


def cond_softmax_likelihood(h: Hierarchy, theta) -> np.ndarray:
    theta = _theta(h, theta, h.num_nodes - 1)
    log_r = sibling_log_softmax(h, embed_nonroot(h, theta))
    return np.exp(sum_over_ancestors(h, log_r))


def cond_sigmoid_likelihood(h: Hierarchy, theta) -> np.ndarray:
    theta = _theta(h, theta, h.num_nodes - 1)
    log_r = embed_nonroot(h, log_expit(theta))
    return np.exp(sum_over_ancestors(h, log_r))


def multilabel_sigmoid_likelihood(h: Hierarchy, theta) -> np.ndarray:
    theta = _theta(h, theta, h.num_nodes - 1)
    return embed_nonroot(h, expit(theta), fill=1.0)


def path_scores(h: Hierarchy, theta) -> np.ndarray:
    """Cumulative scores ``beta = A^T theta`` (parameter sharing)."""
    theta = _theta(h, theta, h.num_nodes)
    return sum_over_ancestors(h, theta)


def deeprtc_likelihood(h: Hierarchy, theta) -> np.ndarray:
    return expit(path_scores(h, theta))


def ps_softmax_likelihood(h: Hierarchy, theta) -> np.ndarray:
    beta = path_scores(h, theta)
    return flat_softmax_likelihood(h, beta[..., h.leaves])


def exclusive_softmax_likelihood(h: Hierarchy, theta) -> np.ndarray:
    theta = _theta(h, theta, h.num_nodes)
    return sum_over_descendants(h, softmax(theta, axis=-1))


def exclusive_likelihood(h: Hierarchy, p, tol: float = VALID_TOL) -> np.ndarray:
    """Mass of each node and not its children, ``p(u) - sum_{v in C(u)} p(v)``."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != h.num_nodes:
        raise ValueError(f"expected {h.num_nodes} likelihoods, got {p.shape[-1]}")
    ex = p - sum_over_children(h, p)
    worst = ex.min() if ex.size else 0.0
    if worst < -tol:
        raise InvalidLikelihoodError(
            f"likelihood is not a probability function on the hierarchy "
            f"(children exceed parent by {-worst:.3g})")
    return np.maximum(ex, 0.0)


def is_valid(h: Hierarchy, p, tol: float = VALID_TOL) -> np.ndarray:
    """Per-row check of ``p(u) >= sum of children`` and ``0 <= p <= 1``."""
    p = np.asarray(p, dtype=float)
    ex = p - sum_over_children(h, p)
    return (ex >= -tol).all(-1) & (p >= -tol).all(-1) & (p <= 1 + tol).all(-1)


_FUNCS = {
    Method.FLAT_SOFTMAX: flat_softmax_likelihood,
    Method.COND_SOFTMAX: cond_softmax_likelihood,
    Method.COND_SIGMOID: cond_sigmoid_likelihood,
    Method.MULTILABEL_SIGMOID: multilabel_sigmoid_likelihood,
    Method.DEEPRTC: deeprtc_likelihood,
    Method.PS_SOFTMAX: ps_softmax_likelihood,
    Method.EXCLUSIVE_SOFTMAX: exclusive_softmax_likelihood,
}


def likelihood(h: Hierarchy, method, theta) -> np.ndarray:
    """Dispatch to the parametrisation named by ``method``."""
    return _FUNCS[Method.parse(method)](h, theta)


def check_validity(h: Hierarchy, method, p, tol_sum: float = 1e-6, tol: float = VALID_TOL) -> bool:
    """Whether ``p`` satisfies the properties declared for ``method``."""
    method = Method.parse(method)
    p = np.atleast_2d(p)
    ok = bool(((p >= 0) & (p <= 1)).all())
    v = method.validity
    if v in (Validity.SUMS_TO_ONE, Validity.PARENT_GE_CHILDREN_SUM):
        ok &= bool((p - sum_over_children(h, p) >= -tol).all())
    if v is Validity.SUMS_TO_ONE:
        ok &= bool(np.allclose(p[:, h.leaves].sum(-1), 1.0, rtol=0, atol=tol_sum))
    if v is Validity.PARENT_GE_EACH_CHILD:
        nonroot = nonroot_nodes(h)
        ok &= bool((p[:, h.parent[nonroot]] - p[:, nonroot] >= -tol).all())
    if method.root_is_one:
        ok &= bool(np.allclose(p[:, h.root], 1.0, rtol=0, atol=tol_sum))
    return ok
