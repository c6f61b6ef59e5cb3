"""Example-level correctness and specificity metrics ``M(y, y_hat)``."""
from __future__ import annotations

import enum

import numpy as np

from .hierarchy import Hierarchy, lca


class MetricKind(str, enum.Enum):
    CORRECT = "correct"
    EXACT = "exact"
    PRECISION = "precision"
    RECALL = "recall"

    @classmethod
    def parse(cls, name) -> MetricKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown metric {name!r}; valid: {valid}") from None


def effective_prediction(h: Hierarchy, y, y_hat):
    """Replace predictions below the ground truth by the ground truth itself.

    A prediction that is a strict descendant of ``y`` is not an error when
    ``y`` is an internal node; it is scored as if it were ``y``.
    """
    scalar = np.ndim(y) == 0 and np.ndim(y_hat) == 0
    y = np.asarray(y, dtype=np.intp)
    y_hat = np.asarray(y_hat, dtype=np.intp)
    out = np.where(h.is_ancestor(y, y_hat), y, y_hat)
    return int(out) if scalar else out


def evaluate(h: Hierarchy, kind, y, y_hat):
    """Metric value for truth ``y`` and prediction ``y_hat``. Broadcasts.

    Apply :func:`effective_prediction` first. Precision at the root
    prediction is 1 (the 0/0 case). Recall is undefined for a root truth
    and raises ``ValueError``.
    """
    kind = MetricKind.parse(kind)
    scalar = np.ndim(y) == 0 and np.ndim(y_hat) == 0
    y = np.asarray(y, dtype=np.intp)
    y_hat = np.asarray(y_hat, dtype=np.intp)
    if kind is MetricKind.CORRECT:
        out = h.is_ancestor(y_hat, y).astype(float)
    elif kind is MetricKind.EXACT:
        out = (y_hat == y).astype(float)
    else:
        common = h.info[lca(h, y, y_hat)]
        if kind is MetricKind.PRECISION:
            denom = h.info[y_hat]
            out = np.divide(common, denom, out=np.ones(np.broadcast(common, denom).shape),
                            where=denom > 0)
        else:
            denom = np.broadcast_to(h.info[y], np.shape(common))
            if np.any(denom <= 0):
                raise ValueError("recall is undefined for examples labelled with the root")
            out = common / denom
    return float(out) if scalar else out


def score(h: Hierarchy, kind, y, y_hat):
    """:func:`evaluate` after the effective-prediction replacement."""
    return evaluate(h, kind, y, effective_prediction(h, y, y_hat))
