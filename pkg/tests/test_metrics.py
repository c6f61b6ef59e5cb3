import numpy as np
import pytest
from hypothesis import given, strategies as st

from hierclass.metrics import MetricKind, effective_prediction, evaluate, score
from helpers import A, A1, A2, B, ROOT, random_tree, t1

LN = np.log


def test_effective_prediction_examples():
    h = t1()
    assert effective_prediction(h, A, A1) == A
    assert effective_prediction(h, A1, A1) == A1
    assert effective_prediction(h, A1, B) == B
    assert effective_prediction(h, A1, A) == A
    np.testing.assert_array_equal(effective_prediction(h, np.array([A, ROOT]), np.array([A2, B])), [A, ROOT])


def test_metric_examples_t1():
    h = t1()
    assert evaluate(h, "correct", A1, A) == 1
    assert evaluate(h, "exact", A1, A) == 0
    assert evaluate(h, "recall", A1, A) == pytest.approx(LN(1.5) / LN(3), rel=1e-12)
    assert evaluate(h, "recall", A1, A) == pytest.approx(0.3691, abs=1e-4)
    assert evaluate(h, "precision", A1, A) == 1
    for kind in MetricKind:
        assert evaluate(h, kind, A1, A1) == 1
    assert evaluate(h, "correct", A1, B) == 0
    assert evaluate(h, "recall", A1, B) == 0
    assert evaluate(h, "precision", A1, B) == 0


def test_precision_at_root_and_recall_domain():
    h = t1()
    assert evaluate(h, MetricKind.PRECISION, B, ROOT) == 1.0
    assert evaluate(h, MetricKind.RECALL, B, ROOT) == 0.0
    with pytest.raises(ValueError, match="root"):
        evaluate(h, MetricKind.RECALL, ROOT, A)
    with pytest.raises(ValueError, match="unknown metric"):
        MetricKind.parse("f1")


def test_precision_partial():
    h = t1()
    # truth b, prediction a1: lca root -> 0; truth a, prediction a2 -> replaced -> 1
    assert score(h, "precision", B, A1) == 0
    assert score(h, "precision", A, A2) == 1
    assert score(h, "exact", A, A2) == 1


@given(st.integers(0, 2**32 - 1))
def test_metric_invariants_exhaustive(seed):
    rng = np.random.default_rng(seed)
    h = random_tree(rng, max_nodes=32)
    n = h.num_nodes
    y, yh = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    y, yh = y.ravel(), yh.ravel()
    nonroot = h.info[y] > 0
    y, yh = y[nonroot], yh[nonroot]
    m = {k: score(h, k, y, yh) for k in MetricKind}
    assert (m[MetricKind.EXACT] <= m[MetricKind.CORRECT]).all()
    assert np.array_equal(m[MetricKind.CORRECT] == 1, m[MetricKind.PRECISION] == 1)
    for k in MetricKind:
        assert ((0 <= m[k]) & (m[k] <= 1)).all()
    leaf = h.leaf_mask[y]
    assert np.array_equal((m[MetricKind.RECALL] == 1)[leaf], (yh == y)[leaf])
    # along each root-to-leaf path: precision and correct never increase past the truth
    for leafnode in h.leaves:
        path = h.path(leafnode)
        for truth in range(1, n):
            prec = score(h, "precision", np.full(len(path), truth), path)
            cor = score(h, "correct", np.full(len(path), truth), path)
            rec = score(h, "recall", np.full(len(path), truth), path)
            assert (np.diff(prec) <= 1e-12).all()
            assert (np.diff(cor) <= 0).all()
            assert (np.diff(rec) >= -1e-12).all()
