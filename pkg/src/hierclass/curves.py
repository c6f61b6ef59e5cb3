"""Operating curves of threshold inference over a dataset.

For each example the predictions reachable by *some* threshold form an
ordered Pareto set in (likelihood, information). A dataset metric is then a
step function of the threshold, obtained by merging the per-example change
points in descending order of likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hierarchy import Hierarchy
from .inference import InferenceSpec
from .metrics import MetricKind, effective_prediction, evaluate


def ordered_pareto_set(x, y) -> np.ndarray:
    """Indices of the ordered Pareto set of points ``(x[i], y[i])``.

    Stable sort descending by ``y``, then stable sort descending by ``x``,
    and keep the points whose ``y`` strictly exceeds that of every
    preceding point. The result has strictly decreasing ``x`` and strictly
    increasing ``y``; of several identical points only the first survives.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be 1-d of equal length, got {x.shape} and {y.shape}")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("NaN in Pareto input")
    if len(x) == 0:
        return np.zeros(0, dtype=np.intp)
    pi = np.argsort(-y, kind="stable")
    rho = np.argsort(-x[pi], kind="stable")
    pi = pi[rho]
    ys = y[pi]
    prev = np.maximum.accumulate(ys)
    keep = np.ones(len(ys), dtype=bool)
    keep[1:] = prev[:-1] < ys[1:]
    return pi[keep]


def batch_pareto(p: np.ndarray, info: np.ndarray, tau_min: float):
    """Ordered Pareto sets of every row of ``p`` restricted to ``p > tau_min``.

    Returns ``(rows, nodes)``: flat arrays listing the kept nodes row by row,
    each row in trace order. Same result as calling
    :func:`ordered_pareto_set` per row on the filtered nodes.
    """
    n, m = p.shape
    pi = np.argsort(-info, kind="stable")
    ps = p[:, pi]
    rho = np.argsort(-ps, axis=1, kind="stable")
    nodes = pi[rho]
    xs = np.take_along_axis(ps, rho, axis=1)
    valid = xs > tau_min
    # Filtered nodes have the lowest likelihoods and so sort last in each row;
    # giving them y=-inf leaves the running maximum of the valid prefix intact.
    ys = np.where(valid, info[nodes], -np.inf)
    prev = np.maximum.accumulate(ys, axis=1)
    keep = np.empty((n, m), dtype=bool)
    keep[:, 0] = True
    keep[:, 1:] = prev[:, :-1] < ys[:, 1:]
    keep &= valid
    rows, cols = np.nonzero(keep)
    return rows, nodes[rows, cols]


@dataclass
class ParetoTrace:
    nodes: np.ndarray
    scores: np.ndarray
    values: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.nodes)


def example_trace(h: Hierarchy, p, label: int, metric_kinds=(), tau_min: float = 0.0) -> ParetoTrace:
    """Ordered predictions of one example and the metric value of each.

    If no node exceeds ``tau_min`` the trace is the root alone.
    """
    p = np.asarray(p, dtype=float)
    cand = np.flatnonzero(p > tau_min)
    nodes = cand[ordered_pareto_set(p[cand], h.info[cand])]
    if len(nodes) == 0:
        nodes = np.array([h.root], dtype=np.intp)
    pred = effective_prediction(h, np.full(len(nodes), label), nodes)
    values = {MetricKind.parse(k): evaluate(h, k, np.full(len(nodes), label), pred)
              for k in metric_kinds}
    return ParetoTrace(nodes=nodes, scores=p[nodes], values=values)


@dataclass(frozen=True)
class Curve:
    """Step function ``Z(tau)`` of a dataset-mean metric.

    ``Z(tau) = base`` for ``tau >= thresholds[0]`` and ``values[j]`` for
    ``thresholds[j] > tau >= thresholds[j + 1]``, the last interval ending
    at ``tau_min``. ``thresholds`` is strictly descending. Thresholds live
    in ``[tau_min, 1)``; evaluating at 1 or above returns ``base``.
    """

    base: float
    thresholds: np.ndarray
    values: np.ndarray
    n: int
    tau_min: float = 0.0
    metric: str = ""

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        count = np.searchsorted(-self.thresholds, -tau, side="left")
        vals = np.concatenate([[self.base], self.values])
        out = vals[count]
        return float(out) if out.ndim == 0 else out

    @property
    def lower_bounds(self) -> np.ndarray:
        """Lower threshold of each constant piece, from the top piece down."""
        return np.concatenate([self.thresholds, [self.tau_min]])

    @property
    def levels(self) -> np.ndarray:
        return np.concatenate([[self.base], self.values])


def _trace_metrics(h, labels, p, kinds, tau_min, chunk=8192):
    n = len(labels)
    row_parts, node_parts = [], []
    for start in range(0, n, chunk):
        r, nd = batch_pareto(p[start:start + chunk], h.info, tau_min)
        row_parts.append(r + start)
        node_parts.append(nd)
    rows = np.concatenate(row_parts)
    nodes = np.concatenate(node_parts)
    # Rows with nothing above tau_min predict the root at every threshold.
    empty = np.setdiff1d(np.arange(n), rows, assume_unique=False)
    if len(empty):
        rows = np.concatenate([rows, empty])
        nodes = np.concatenate([nodes, np.full(len(empty), h.root)])
        o = np.argsort(rows, kind="stable")
        rows, nodes = rows[o], nodes[o]
    s = p[rows, nodes]
    # Above the largest likelihood nothing passes and the root is predicted.
    # Inside [tau_min, 1) that matters only when the top score is below 1 and
    # is not the root's; prepend the root with an infinite score as the base.
    first = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    lift = first[(nodes[first] != h.root) & (s[first] < 1)]
    if len(lift):
        rows = np.insert(rows, lift, rows[lift])
        nodes = np.insert(nodes, lift, h.root)
        s = np.insert(s, lift, np.inf)
    y = labels[rows]
    pred = effective_prediction(h, y, nodes)
    z = {k: evaluate(h, k, y, pred) for k in kinds}
    return rows, nodes, s, z


def _merge(rows, s, z, n, tau_min, metric):
    first = np.ones(len(rows), dtype=bool)
    first[1:] = rows[1:] != rows[:-1]
    base = z[first].sum()
    delta = np.diff(z, prepend=0.0)
    later = ~first
    s_l, d_l, r_l = s[later], delta[later], rows[later]
    k_l = np.arange(len(rows))[later]
    order = np.lexsort((k_l, r_l, -s_l))
    s_l, d_l = s_l[order], d_l[order]
    cum = (base + np.cumsum(d_l)) / n
    # Collapse equal thresholds: keep the value after the last change at each.
    last = np.ones(len(s_l), dtype=bool)
    last[:-1] = s_l[:-1] != s_l[1:]
    return Curve(base=float(base / n), thresholds=s_l[last], values=cum[last],
                 n=n, tau_min=float(tau_min), metric=metric)


def _prepare(h, labels, p):
    labels = np.asarray(labels, dtype=np.intp)
    p = np.asarray(p, dtype=float)
    if len(labels) == 0:
        raise ValueError("empty dataset")
    if p.ndim != 2 or p.shape != (len(labels), h.num_nodes):
        raise ValueError(f"expected likelihoods of shape ({len(labels)}, {h.num_nodes}), got {p.shape}")
    if ((labels < 0) | (labels >= h.num_nodes)).any():
        raise ValueError("label out of range")
    if np.isnan(p).any():
        raise ValueError("NaN in likelihoods")
    return labels, p


def construct_dataset_curves(h: Hierarchy, labels, p, metric_kinds, tau_min: float = 0.0) -> dict:
    """One :class:`Curve` per metric, sharing the per-example Pareto sets."""
    labels, p = _prepare(h, labels, p)
    kinds = [MetricKind.parse(k) for k in metric_kinds]
    rows, _, s, z = _trace_metrics(h, labels, p, kinds, tau_min)
    return {k: _merge(rows, s, z[k], len(labels), tau_min, k.value) for k in kinds}


def construct_dataset_curve(h: Hierarchy, labels, p, metric_kind, tau_min: float = 0.0) -> Curve:
    kind = MetricKind.parse(metric_kind)
    return construct_dataset_curves(h, labels, p, [kind], tau_min)[kind]


@dataclass(frozen=True)
class PairedCurve:
    """Operating points of two curves over the union of their breakpoints.

    Point ``j`` holds for thresholds in ``[tau[j], tau[j-1])``.
    """

    a: np.ndarray
    b: np.ndarray
    tau: np.ndarray

    def points(self):
        return list(zip(self.a.tolist(), self.b.tolist(), self.tau.tolist()))

    @property
    def dashed(self) -> np.ndarray:
        """Points whose threshold lies below 0.5."""
        return self.tau < 0.5

    @property
    def split_index(self) -> int:
        """Index of the first point below 0.5, or ``len`` if none."""
        below = np.flatnonzero(self.dashed)
        return int(below[0]) if len(below) else len(self.tau)

    def __len__(self):
        return len(self.tau)


def tabulate(curves) -> tuple:
    """Common lower bounds (descending) and each curve's value on every piece."""
    curves = list(curves)
    if not curves:
        raise ValueError("no curves")
    n, tau_min = curves[0].n, curves[0].tau_min
    for c in curves[1:]:
        if c.n != n or c.tau_min != tau_min:
            raise ValueError("curves were built from different datasets or tau_min")
    uni = np.unique(np.concatenate([c.thresholds for c in curves]))[::-1]
    lower = np.concatenate([uni, [tau_min]])
    # Each piece [lower[j], lower[j-1]) is evaluated at its lower end.
    vals = [c(lower) for c in curves]
    return lower, vals


def pair_curve(curve_a: Curve, curve_b: Curve) -> PairedCurve:
    lower, (va, vb) = tabulate([curve_a, curve_b])
    return PairedCurve(a=np.atleast_1d(va), b=np.atleast_1d(vb), tau=lower)


def step_integral(values, recall, tau) -> float:
    """Area under a step curve of ``values`` against ``recall``.

    Points are ordered by ascending recall (ties by descending threshold),
    preceded by a virtual point at recall 0 with infinite threshold taking
    the value of the highest-threshold point. Each recall step uses the
    value of whichever endpoint has the higher threshold.
    """
    values = np.asarray(values, dtype=float)
    recall = np.asarray(recall, dtype=float)
    tau = np.asarray(tau, dtype=float)
    top = int(np.argmax(tau))
    v = np.concatenate([[values[top]], values])
    r = np.concatenate([[0.0], recall])
    t = np.concatenate([[np.inf], tau])
    o = np.lexsort((-t, r))
    v, r, t = v[o], r[o], t[o]
    left = np.where(t[:-1] >= t[1:], v[:-1], v[1:])
    return float(np.sum(left * np.diff(r)))


def recall_at_correct(correct, recall, level: float, slack: float = 1e-12) -> float:
    ok = np.asarray(correct) >= level - slack
    return float(np.max(np.asarray(recall)[ok])) if ok.any() else 0.0


def summary_metrics(correct_or_precision: Curve, recall: Curve, correct: Curve | None = None) -> dict:
    """AP/AC and R@90C/R@95C from curves on the same dataset.

    With a precision curve as the first argument, pass the Correct curve as
    ``correct`` to obtain AC and the R@XC intercepts as well.
    """
    first = correct_or_precision
    out = {}
    curves = [first, recall] + ([correct] if correct is not None else [])
    lower, vals = tabulate(curves)
    rec = vals[1]
    kind = first.metric
    if kind == MetricKind.PRECISION.value:
        out["AP"] = step_integral(vals[0], rec, lower)
        cor = vals[2] if correct is not None else None
    else:
        cor = vals[0]
    if cor is not None:
        out["AC"] = step_integral(cor, rec, lower)
        out["R@90C"] = recall_at_correct(cor, rec, 0.90)
        out["R@95C"] = recall_at_correct(cor, rec, 0.95)
    return out


def f1_at_rule(h: Hierarchy, labels, p, rule: InferenceSpec, aggregate: str = "harmonic_of_means") -> float:
    """F1 of information precision and recall for the predictions of ``rule``.

    ``aggregate="harmonic_of_means"`` takes the harmonic mean of the dataset
    means; ``"mean_of_harmonics"`` averages per-example F1.
    """
    labels, p = _prepare(h, labels, p)
    pred = effective_prediction(h, labels, np.atleast_1d(rule(h, p)))
    prec = evaluate(h, MetricKind.PRECISION, labels, pred)
    rec = evaluate(h, MetricKind.RECALL, labels, pred)
    if aggregate == "harmonic_of_means":
        mp, mr = prec.mean(), rec.mean()
        return 0.0 if mp == 0 or mr == 0 else float(2 * mp * mr / (mp + mr))
    if aggregate == "mean_of_harmonics":
        denom = prec + rec
        f = np.divide(2 * prec * rec, denom, out=np.zeros_like(denom), where=denom > 0)
        return float(f.mean())
    raise ValueError(f"unknown aggregate {aggregate!r}")
