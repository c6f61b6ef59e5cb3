"""Fixtures and generators shared across the test modules."""
import numpy as np

from hierclass.hierarchy import build_hierarchy, from_parents, sum_over_descendants

T1_EDGES = [("root", ""), ("a", "root"), ("b", "root"), ("a1", "a"), ("a2", "a")]
ROOT, A, B, A1, A2 = range(5)


def t1():
    return build_hierarchy(T1_EDGES)


def random_tree(rng, max_nodes=32, min_nodes=3, size=None):
    """Random tree in which every internal node has at least two children.

    Node indices are assigned in creation order, so parents precede children.
    """
    target = int(size) if size is not None else int(rng.integers(min_nodes, max_nodes + 1))
    parents = [-1, 0, 0]
    children = {0: 2}
    while len(parents) < target:
        v = int(rng.integers(len(parents)))
        if children.get(v, 0) == 0:
            if len(parents) + 2 > target:
                continue
            parents += [v, v]
            children[v] = 2
        else:
            parents.append(v)
            children[v] += 1
    return from_parents(parents)


def random_exclusive(rng, h, n, leaves_only=False, quantize=None):
    """Rows of exclusive mass: a Dirichlet draw, or multinomial counts when ``quantize`` is set."""
    support = h.leaves if leaves_only else np.arange(h.num_nodes)
    ex = np.zeros((n, h.num_nodes))
    if quantize:
        counts = rng.multinomial(quantize, np.full(len(support), 1.0 / len(support)), size=n)
        ex[:, support] = counts / quantize
    else:
        ex[:, support] = rng.dirichlet(np.full(len(support), 0.5), size=n)
    return ex


def random_valid_p(rng, h, n, leaves_only=False, quantize=None):
    """Valid likelihoods (children never exceed their parent) via descendant sums."""
    return sum_over_descendants(h, random_exclusive(rng, h, n, leaves_only, quantize))


def central_difference(f, x, eps=1e-4):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = eps
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * eps)
    return g
