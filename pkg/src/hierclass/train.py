"""Synthetic hierarchical data and a minibatch-SGD linear trainer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hierarchy import Hierarchy, build_hierarchy, subtree_projection, truncate
from .likelihoods import Method, likelihood, param_dim
from .losses import COMPATIBLE, FlatNLL, loss_value_and_grad


class TrainingError(FloatingPointError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.labels)


@dataclass
class SyntheticSpec:
    depth: int = 2
    branching: tuple = (4, 4)
    feature_dim: int = 32
    train_per_class: int = 125
    test_per_class: int = 50
    sigma_tree: float = 1.0
    sigma_obs: float = 3.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.branching
        if self.depth < 1 or self.feature_dim < 1:
            raise ValueError("depth and feature_dim must be positive")
        if lo < 2 or hi < lo:
            raise ValueError(f"branching range must satisfy 2 <= min <= max, got {self.branching}")
        if self.train_per_class < 1 or self.test_per_class < 0:
            raise ValueError("per-class sample counts must be positive")
        if self.sigma_tree < 0 or self.sigma_obs < 0:
            raise ValueError("noise scales must be non-negative")


def generate_synthetic(spec: SyntheticSpec):
    """Random tree whose node means drift from their parent's mean.

    Leaf examples are drawn around the leaf means, so feature similarity
    follows the hierarchy. Returns ``(hierarchy, train, test)``.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.branching
    edges = [("root", "")]
    means = [np.zeros(spec.feature_dim)]
    frontier = [(0, "root")]
    for _ in range(spec.depth):
        nxt = []
        for idx, name in frontier:
            for c in range(int(rng.integers(lo, hi + 1))):
                child = f"{name}.{c}" if name != "root" else f"n{c}"
                edges.append((child, name))
                means.append(means[idx] + spec.sigma_tree * rng.standard_normal(spec.feature_dim))
                nxt.append((len(edges) - 1, child))
        frontier = nxt
    h = build_hierarchy(edges)
    means = np.array(means)

    def sample(per_class):
        labels = np.repeat(h.leaves, per_class)
        noise = spec.sigma_obs * rng.standard_normal((len(labels), spec.feature_dim))
        return Dataset(features=means[labels] + noise, labels=labels)

    train = sample(spec.train_per_class)
    test = sample(spec.test_per_class)
    return h, train, test


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 3e-4
    cosine_schedule: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0 or self.weight_decay < 0 or not 0 <= self.momentum < 1:
            raise ValueError("invalid optimiser settings")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray
    method: Method
    hierarchy: Hierarchy
    history: list = field(default_factory=list)

    def scores(self, features) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.weights.T + self.bias

    def likelihoods(self, features) -> np.ndarray:
        return likelihood(self.hierarchy, self.method, self.scores(features))


def cosine_lr(lr0: float, step: int, total: int) -> float:
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total))


def train_linear(h: Hierarchy, data: Dataset, method, loss, cfg: TrainConfig | None = None,
                 labels=None) -> LinearModel:
    """Minibatch SGD with momentum on the mean loss plus weight decay.

    ``labels`` overrides ``data.labels`` (e.g. labels projected onto a
    sub-tree). The per-epoch mean training loss is kept in ``history``.
    """
    cfg = cfg or TrainConfig()
    method = Method.parse(method)
    if method not in COMPATIBLE[loss.name]:
        raise ValueError(f"loss {loss.name} cannot train method {method.value}")
    x = np.asarray(data.features, dtype=float)
    y = np.asarray(data.labels if labels is None else labels, dtype=np.intp)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be (N, F) with one label per row")
    dim = param_dim(h, method)
    rng = np.random.default_rng(cfg.seed)
    w = np.zeros((dim, x.shape[1]))
    b = np.zeros(dim)
    vw = np.zeros_like(w)
    vb = np.zeros_like(b)
    steps_per_epoch = math.ceil(len(y) / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    history = []
    step = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(len(y))
        total_loss = 0.0
        for bi in range(steps_per_epoch):
            idx = perm[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                theta = x[idx] @ w.T + b
            if not np.isfinite(theta).all():
                raise TrainingError(f"non-finite scores at step {step} (batch {bi})")
            lv, g = loss_value_and_grad(loss, h, y[idx], theta, rng=rng)
            if not np.isfinite(lv).all() or not np.isfinite(g).all():
                raise TrainingError(f"non-finite loss at step {step} (batch {bi})")
            total_loss += lv.sum()
            g = g / len(idx)
            gw = g.T @ x[idx] + cfg.weight_decay * w
            gb = g.sum(0)
            lr = cosine_lr(cfg.learning_rate, step, total) if cfg.cosine_schedule else cfg.learning_rate
            vw = cfg.momentum * vw + gw
            vb = cfg.momentum * vb + gb
            w = w - lr * vw
            b = b - lr * vb
            step += 1
        history.append(total_loss / len(y))
    return LinearModel(weights=w, bias=b, method=method, hierarchy=h, history=history)


def train_level_truncated(h: Hierarchy, data: Dataset, level: int, cfg: TrainConfig | None = None) -> LinearModel:
    """Flat softmax trained on the hierarchy cut off at depth ``level``."""
    if not 1 <= level <= h.max_depth:
        raise ValueError(f"level must lie in [1, {h.max_depth}]")
    h_level = truncate(h, level)
    proj = subtree_projection(h, h_level)
    return train_linear(h_level, data, Method.FLAT_SOFTMAX, FlatNLL(), cfg, labels=proj[data.labels])


def level_accuracy(model: LinearModel, h_full: Hierarchy, data: Dataset, level: int) -> float:
    """Accuracy at depth ``level`` of leaf predictions projected upwards."""
    h_model = model.hierarchy
    if level > h_model.max_depth:
        raise ValueError(f"model was trained at depth {h_model.max_depth} < {level}")
    p = model.likelihoods(data.features)
    pred = h_model.leaves[np.argmax(p[:, h_model.leaves], axis=1)]
    pred_at = h_model.ancestor_at_depth(pred, level)
    truth_at = h_full.ancestor_at_depth(np.asarray(data.labels), level)
    pred_names = np.array([h_model.names[v] if v >= 0 else "" for v in pred_at])
    truth_names = np.array([h_full.names[v] if v >= 0 else "" for v in truth_at])
    return float(np.mean(pred_names == truth_names))
