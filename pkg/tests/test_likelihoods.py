import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import expit, softmax

from hierclass.likelihoods import (InvalidLikelihoodError, Method, Validity, check_validity,
                                   cond_sigmoid_likelihood, cond_softmax_likelihood, deeprtc_likelihood,
                                   exclusive_likelihood, exclusive_softmax_likelihood, flat_softmax_likelihood,
                                   is_valid, likelihood, multilabel_sigmoid_likelihood, param_dim,
                                   ps_softmax_likelihood)
from helpers import A, A1, A2, B, ROOT, random_tree, random_valid_p, t1

LN2, LN3 = np.log(2), np.log(3)


def test_param_dims():
    h = t1()
    dims = {m: param_dim(h, m) for m in Method}
    assert dims[Method.FLAT_SOFTMAX] == 3
    assert dims[Method.COND_SOFTMAX] == dims[Method.COND_SIGMOID] == dims[Method.MULTILABEL_SIGMOID] == 4
    assert dims[Method.DEEPRTC] == dims[Method.PS_SOFTMAX] == dims[Method.EXCLUSIVE_SOFTMAX] == 5
    with pytest.raises(ValueError, match="valid: flat_softmax"):
        Method.parse("softmax")


def test_flat_softmax_examples():
    h = t1()
    np.testing.assert_allclose(flat_softmax_likelihood(h, np.zeros(3)), [1, 2 / 3, 1 / 3, 1 / 3, 1 / 3])
    p = flat_softmax_likelihood(h, np.array([LN2, 0, 0]))  # leaves in order b, a1, a2
    np.testing.assert_allclose(p[[B, A, A1, A2]], [0.5, 0.5, 0.25, 0.25], rtol=1e-12)
    th = np.random.default_rng(0).normal(size=3)
    np.testing.assert_allclose(flat_softmax_likelihood(h, th + 7.5), flat_softmax_likelihood(h, th), atol=1e-12)
    with pytest.raises(ValueError):
        flat_softmax_likelihood(h, np.zeros(4))


def test_cond_softmax_examples():
    h = t1()  # parameters over non-root nodes: a, b, a1, a2
    np.testing.assert_allclose(cond_softmax_likelihood(h, np.zeros(4)), [1, .5, .5, .25, .25])
    p = cond_softmax_likelihood(h, np.array([LN3, 0, 0, 0]))
    assert p[A] == pytest.approx(0.75) and p[A1] == pytest.approx(0.375)
    shifted = cond_softmax_likelihood(h, np.array([LN3 + 2, 2, -1, -1]))
    np.testing.assert_allclose(shifted, p, atol=1e-12)


def test_cond_sigmoid_examples():
    h = t1()
    np.testing.assert_allclose(cond_sigmoid_likelihood(h, np.zeros(4)), [1, .5, .5, .25, .25])
    p = cond_sigmoid_likelihood(h, np.array([0, 0, 2, 0]))
    assert p[A1] == pytest.approx(0.5 * expit(2)) and p[A1] == pytest.approx(0.4404, abs=1e-4)
    sat = cond_sigmoid_likelihood(h, np.array([40, -40, 40, -40]))
    np.testing.assert_allclose(sat[[A, A1]], 1, atol=1e-12)


def test_multilabel_sigmoid_examples():
    h = t1()
    np.testing.assert_allclose(multilabel_sigmoid_likelihood(h, np.zeros(4)), [1, .5, .5, .5, .5])
    assert multilabel_sigmoid_likelihood(h, np.array([LN3, 0, 0, 0]))[A] == pytest.approx(0.75)
    p = multilabel_sigmoid_likelihood(h, np.array([-5, 0, 5, 0]))
    assert p[A1] > p[A]
    assert not check_validity(h, Method.COND_SOFTMAX, p)
    assert check_validity(h, Method.MULTILABEL_SIGMOID, p)


def test_deeprtc_examples():
    h = t1()
    np.testing.assert_allclose(deeprtc_likelihood(h, np.zeros(5)), 0.5)
    p = deeprtc_likelihood(h, np.array([0, 1, -1, 1, -1.0]))
    assert p[A1] == pytest.approx(expit(2)) and p[A1] == pytest.approx(0.8808, abs=1e-4)
    th = np.random.default_rng(1).normal(size=5)
    shifted = th.copy()
    shifted[ROOT] += 1.5
    beta = np.log(deeprtc_likelihood(h, th)) - np.log1p(-deeprtc_likelihood(h, th))
    beta2 = np.log(deeprtc_likelihood(h, shifted)) - np.log1p(-deeprtc_likelihood(h, shifted))
    np.testing.assert_allclose(beta2 - beta, 1.5, atol=1e-9)


def test_ps_softmax_examples():
    h = t1()
    np.testing.assert_allclose(ps_softmax_likelihood(h, np.zeros(5)), [1, 2 / 3, 1 / 3, 1 / 3, 1 / 3])
    # leaf path scores (b, a1, a2) = (0, ln 2, ln 2) give weights 1, 2, 2
    p = ps_softmax_likelihood(h, np.array([0, LN2, 0, 0, 0]))
    assert p[B] == pytest.approx(1 / 5, rel=1e-12) and p[A] == pytest.approx(4 / 5, rel=1e-12)


def test_exclusive_softmax_examples():
    h = t1()
    np.testing.assert_allclose(exclusive_softmax_likelihood(h, np.zeros(5)), [1, .6, .2, .2, .2])
    p = exclusive_softmax_likelihood(h, np.array([0, LN2, 0, 0, 0]))
    assert p[A] == pytest.approx(2 / 3)
    # with internal scores driven down the mass concentrates on the leaves
    th = np.array([-50, -50, 0.3, -0.2, 0.1])
    np.testing.assert_allclose(exclusive_softmax_likelihood(h, th), flat_softmax_likelihood(h, th[h.leaves]),
                               atol=1e-12)


def test_exclusive_likelihood():
    h = t1()
    p = flat_softmax_likelihood(h, np.zeros(3))
    np.testing.assert_allclose(exclusive_likelihood(h, p), [0, 0, 1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    with pytest.raises(InvalidLikelihoodError):
        exclusive_likelihood(h, np.array([1, .5, .5, .6, .6]))
    # a rounding-sized violation is clamped rather than rejected
    ex = exclusive_likelihood(h, np.array([1, .5, .5, .25, .25 + 5e-10]))
    assert ex.min() == 0.0


@given(st.integers(0, 2**32 - 1))
def test_exclusive_round_trip_and_leaves(seed):
    rng = np.random.default_rng(seed)
    h = random_tree(rng, max_nodes=64)
    th = 3 * rng.normal(size=(4, h.num_nodes))
    p = exclusive_softmax_likelihood(h, th)
    np.testing.assert_allclose(exclusive_likelihood(h, p), softmax(th, axis=-1), atol=1e-9)
    q = random_valid_p(rng, h, 4)
    np.testing.assert_array_equal(exclusive_likelihood(h, q)[:, h.leaves], q[:, h.leaves])
    assert is_valid(h, q).all()


@given(st.integers(0, 2**32 - 1))
def test_cond_softmax_reencodes_flat(seed):
    rng = np.random.default_rng(seed)
    h = random_tree(rng, max_nodes=64)
    flat = flat_softmax_likelihood(h, rng.normal(size=h.num_leaves))
    nonroot = np.flatnonzero(h.parent >= 0)
    theta = np.log(flat[nonroot] / flat[h.parent[nonroot]])
    np.testing.assert_allclose(cond_softmax_likelihood(h, theta), flat, atol=1e-6)


@pytest.mark.parametrize("method", list(Method))
def test_finite_for_large_scores(method):
    rng = np.random.default_rng(0)
    h = random_tree(rng, max_nodes=40)
    th = rng.choice([-700.0, 700.0, 0.0], size=(20, param_dim(h, method)))
    p = likelihood(h, method, th)
    assert np.isfinite(p).all() and (p >= 0).all() and (p <= 1 + 1e-9).all()


def test_validity_table_and_checks():
    assert Method.FLAT_SOFTMAX.validity is Validity.SUMS_TO_ONE
    assert Method.EXCLUSIVE_SOFTMAX.validity is Validity.PARENT_GE_CHILDREN_SUM
    assert Method.COND_SIGMOID.validity is Validity.PARENT_GE_EACH_CHILD
    assert Method.DEEPRTC.validity is Validity.NONE and not Method.DEEPRTC.root_is_one
    h = t1()
    # cond sigmoid can break the children-sum property while keeping parent >= each child
    p = cond_sigmoid_likelihood(h, np.array([5, 5, 5, 5.0]))
    assert not is_valid(h, p)
    assert check_validity(h, Method.COND_SIGMOID, p)
