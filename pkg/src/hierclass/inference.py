"""Inference rules mapping per-node likelihoods ``p`` to a predicted node.

Each rule accepts ``p`` of shape ``(|Y|,)`` and returns an ``int``, or
``(N, |Y|)`` and returns an ``(N,)`` index array. Ties are broken by higher
likelihood, then lower node index, unless stated otherwise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .hierarchy import Hierarchy, sum_over_descendants
from .likelihoods import exclusive_likelihood
from .metrics import MetricKind, score


def _rows(h: Hierarchy, p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != h.num_nodes:
        raise ValueError(f"expected {h.num_nodes} likelihoods per row, got {p.shape[-1]}")
    return np.atleast_2d(p), p.ndim == 1


def _out(idx, single):
    return int(idx[0]) if single else idx


def lex_argmax(mask, *keys):
    """Row-wise argmax over ``mask`` of ``keys`` in lexicographic order.

    Remaining ties go to the lowest index. Rows with an empty mask give -1.
    """
    mask = np.array(mask, dtype=bool, copy=True)
    for key in keys:
        key = np.broadcast_to(key, mask.shape)
        best = np.where(mask, key, -np.inf).max(axis=-1, keepdims=True)
        mask &= key == best
    has = mask.any(axis=-1)
    return np.where(has, mask.argmax(axis=-1), -1)


def infer_confidence_threshold(h: Hierarchy, p, tau: float):
    """Most informative node with ``p > tau``; the root if none qualifies."""
    rows, single = _rows(h, p)
    idx = lex_argmax(rows > tau, h.info, rows)
    idx = np.where(idx < 0, h.root, idx)
    return _out(idx, single)


def infer_majority(h: Hierarchy, p):
    return infer_confidence_threshold(h, p, 0.5)


def max_over_non_ancestors(h: Hierarchy, rows: np.ndarray) -> np.ndarray:
    """``out[i, y] = max of rows[i, u] over u not an ancestor of y`` (-inf if none)."""
    n, m = rows.shape
    width = min(m, h.max_depth + 2)
    # At most depth+1 nodes are ancestors, so one of the top depth+2 values is not.
    top = np.argsort(-rows, axis=1, kind="stable")[:, :width]
    top_vals = np.take_along_axis(rows, top, axis=1)
    nodes = np.arange(m)
    anc = h.is_ancestor(top[:, None, :], nodes[None, :, None])  # (n, m, width)
    first = np.where(~anc, np.arange(width), width).min(axis=-1)
    padded = np.concatenate([top_vals, np.full((n, 1), -np.inf)], axis=1)
    return np.take_along_axis(padded, first, axis=1)


def infer_plurality(h: Hierarchy, p):
    """Most informative node strictly more likely than every non-ancestor."""
    rows, single = _rows(h, p)
    valid = rows > max_over_non_ancestors(h, rows)
    idx = lex_argmax(valid, h.info, rows)
    idx = np.where(idx < 0, h.root, idx)
    return _out(idx, single)


def infer_leaf(h: Hierarchy, p):
    rows, single = _rows(h, p)
    idx = h.leaves[np.argmax(rows[:, h.leaves], axis=1)]
    return _out(idx, single)


def infer_info_threshold(h: Hierarchy, p, zeta: float):
    """Most likely node with information at least ``zeta``."""
    rows, single = _rows(h, p)
    ok = h.info >= zeta
    if not ok.any():
        raise ValueError(f"no node has information >= {zeta} (maximum {h.info.max():.6g})")
    idx = lex_argmax(np.broadcast_to(ok, rows.shape), rows)
    return _out(idx, single)


def infer_expected_info(h: Hierarchy, p, lam: float = 0.0):
    """Maximiser of ``(I(y) + lam) * p(y)``."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    rows, single = _rows(h, p)
    gain = (h.info + lam) * rows
    idx = lex_argmax(np.ones(rows.shape, dtype=bool), gain, rows)
    return _out(idx, single)


class CostKind(str, enum.Enum):
    NEG_INFO_REWARD = "neg_info_reward"


def neg_info_cost_table(h: Hierarchy) -> np.ndarray:
    """``C[u, y] = -[y is an ancestor of u] * I(y)`` for truth ``u`` and prediction ``y``."""
    nodes = np.arange(h.num_nodes)
    return -(h.is_ancestor(nodes[None, :], nodes[:, None]) * h.info[None, :])


def infer_crm(h: Hierarchy, p, cost=CostKind.NEG_INFO_REWARD, over: str = "all"):
    """Conditional risk minimisation.

    ``over="all"`` takes both the expectation and the minimisation over all
    nodes using the exclusive likelihood, which requires a valid ``p``.
    ``over="leaves"`` is the classical rule over leaf nodes. ``cost`` is
    either :class:`CostKind` or a ``|Y| x |Y|`` table ``C[truth, pred]``.
    Ties go to the lowest node index.
    """
    rows, single = _rows(h, p)
    if over not in ("all", "leaves"):
        raise ValueError(f"over must be 'all' or 'leaves', got {over!r}")
    table = None
    if not isinstance(cost, (CostKind, str)):
        table = np.asarray(cost, dtype=float)
        if table.shape != (h.num_nodes, h.num_nodes) or not np.isfinite(table).all():
            raise ValueError(f"cost table must be a finite {h.num_nodes}x{h.num_nodes} array")
    elif CostKind(cost) is not CostKind.NEG_INFO_REWARD:
        raise ValueError(f"unknown cost {cost!r}")

    if over == "all":
        ex = exclusive_likelihood(h, rows)
        if table is None:
            # sum_u -[y >= u] I(y) ex(u) = -I(y) * (mass of ex under y)
            expected = -h.info * sum_over_descendants(h, ex)
        else:
            expected = ex @ table
        idx = np.argmin(expected, axis=1)
    else:
        leaves = h.leaves
        sub = neg_info_cost_table(h) if table is None else table
        sub = sub[np.ix_(leaves, leaves)]
        expected = rows[:, leaves] @ sub
        idx = leaves[np.argmin(expected, axis=1)]
    return _out(idx, single)


class Rule(str, enum.Enum):
    CONFIDENCE_THRESHOLD = "confidence_threshold"
    MAJORITY = "majority"
    PLURALITY = "plurality"
    LEAF = "leaf"
    INFO_THRESHOLD = "info_threshold"
    EXPECTED_INFO = "expected_info"
    CRM = "crm"

    @classmethod
    def parse(cls, name) -> Rule:
        if isinstance(name, cls):
            return name
        name = str(name).lower()
        if name == "threshold":
            return cls.CONFIDENCE_THRESHOLD
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown rule {name!r}; valid: {valid}") from None


@dataclass(frozen=True)
class InferenceSpec:
    """An inference rule together with its parameter."""

    rule: Rule
    tau: float = 0.5
    zeta: float = 0.0
    lam: float = 0.0
    cost: object = CostKind.NEG_INFO_REWARD
    over: str = "all"

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule.parse(self.rule))
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must lie in [0, 1), got {self.tau}")
        if self.zeta < 0 or self.lam < 0:
            raise ValueError("zeta and lam must be non-negative")

    def __call__(self, h: Hierarchy, p):
        r = self.rule
        if r is Rule.CONFIDENCE_THRESHOLD:
            return infer_confidence_threshold(h, p, self.tau)
        if r is Rule.MAJORITY:
            return infer_majority(h, p)
        if r is Rule.PLURALITY:
            return infer_plurality(h, p)
        if r is Rule.LEAF:
            return infer_leaf(h, p)
        if r is Rule.INFO_THRESHOLD:
            return infer_info_threshold(h, p, self.zeta)
        if r is Rule.EXPECTED_INFO:
            return infer_expected_info(h, p, self.lam)
        return infer_crm(h, p, self.cost, self.over)


def search_lambda(h: Hierarchy, p, labels, target_correct: float,
                  grid=None, bisection_steps: int = 30):
    """Smallest ``lam`` found whose expected-information predictions reach ``target_correct``.

    Mean Correct is not guaranteed to be monotone in ``lam``, so this scans
    a grid, bisects between the first feasible grid point and its
    predecessor, and returns the best feasible ``(lam, correct)`` it saw.
    Returns ``(None, best)`` if no candidate reaches the target.
    """
    labels = np.asarray(labels, dtype=np.intp)

    def correct(lam):
        pred = infer_expected_info(h, p, lam)
        return float(np.mean(score(h, MetricKind.CORRECT, labels, pred)))

    if grid is None:
        grid = np.concatenate([[0.0], np.logspace(-3, 3, 25)])
    grid = np.sort(np.asarray(grid, dtype=float))
    values = [correct(lam) for lam in grid]
    feasible = [i for i, c in enumerate(values) if c >= target_correct]
    if not feasible:
        return None, max(values)
    i = feasible[0]
    best_lam, best_c = grid[i], values[i]
    if i > 0:
        lo, hi = grid[i - 1], grid[i]
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            c = correct(mid)
            if c >= target_correct:
                hi = mid
                if mid < best_lam:
                    best_lam, best_c = mid, c
            else:
                lo = mid
    return float(best_lam), best_c
