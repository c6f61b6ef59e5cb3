"""Rooted class hierarchy and the tree quantities derived from it.

Nodes are identified by their row index in the input edge list. Every other
module works with these integer indices; names only matter at the file
boundary and when relating two hierarchies that share node names.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class HierarchyError(ValueError):
    """Raised when an edge list does not describe a valid class tree."""


class Relations(NamedTuple):
    ancestors: frozenset
    descendants: frozenset
    leaves_under: frozenset
    siblings: frozenset


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """Immutable rooted tree.

    ``parent[root] == -1``. ``order`` is a pre-order traversal (parents
    before children, children visited in index order); ``tin``/``tout`` are
    the positions in that order delimiting each node's subtree, so that
    ``u`` is an ancestor of ``v`` iff ``tin[u] <= tin[v] < tout[u]``.
    """

    names: tuple
    parent: np.ndarray
    children: tuple
    depth: np.ndarray
    leaf_count: np.ndarray
    info: np.ndarray
    root: int
    order: np.ndarray
    tin: np.ndarray
    tout: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    @property
    def leaves(self) -> np.ndarray:
        return self._leaves

    @property
    def num_leaves(self) -> int:
        return len(self._leaves)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def __post_init__(self):
        is_leaf = np.array([len(c) == 0 for c in self.children], dtype=bool)
        object.__setattr__(self, "leaf_mask", is_leaf)
        object.__setattr__(self, "_leaves", np.flatnonzero(is_leaf))
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})
        # Nodes grouped by depth, used by the level-wise tree sums.
        levels = [np.flatnonzero(self.depth == d) for d in range(int(self.depth.max()) + 1)]
        object.__setattr__(self, "levels", tuple(levels))
        for arr in (self.parent, self.depth, self.leaf_count, self.info,
                    self.order, self.tin, self.tout, is_leaf):
            arr.setflags(write=False)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown node name {name!r}") from None

    def has_name(self, name: str) -> bool:
        return name in self._index

    def _check(self, y) -> int:
        y = int(y)
        if not 0 <= y < self.num_nodes:
            raise IndexError(f"node {y} out of range for hierarchy of {self.num_nodes} nodes")
        return y

    def is_ancestor(self, u, v):
        """Whether ``u`` is an (inclusive) ancestor of ``v``. Broadcasts."""
        u = np.asarray(u)
        v = np.asarray(v)
        tu = self.tin[u]
        return (tu <= self.tin[v]) & (self.tin[v] < self.tout[u])

    def path(self, y) -> np.ndarray:
        """Ancestors of ``y`` ordered from the root down to ``y``."""
        y = self._check(y)
        out = []
        while y >= 0:
            out.append(y)
            y = int(self.parent[y])
        return np.array(out[::-1], dtype=np.intp)

    def ancestor_at_depth(self, y, k):
        """Ancestor of ``y`` at depth ``k``, or -1 where ``k > depth[y]``. Broadcasts over ``y``."""
        y = np.asarray(y, dtype=np.intp)
        out = np.array(y, copy=True)
        d = self.depth[y]
        for _ in range(self.max_depth - k):
            deeper = self.depth[out] > k
            out = np.where(deeper, self.parent[out], out)
        return np.where(d >= k, out, -1)

    def descendants_of(self, y) -> np.ndarray:
        y = self._check(y)
        return np.sort(self.order[self.tin[y]:self.tout[y]])

    def __repr__(self):
        return (f"Hierarchy(num_nodes={self.num_nodes}, num_leaves={self.num_leaves}, "
                f"max_depth={self.max_depth})")


def build_hierarchy(edges: Iterable[Sequence], allow_unary_chains: bool = False) -> Hierarchy:
    """Build a hierarchy from ``(child, parent)`` name pairs.

    The root is the single entry whose parent is empty (``""`` or ``None``).
    Node indices follow the order of ``edges``.
    """
    edges = [(str(c), "" if p is None else str(p)) for c, p in edges]
    names = tuple(c for c, _ in edges)
    if not names:
        raise HierarchyError("empty hierarchy")
    index = {}
    for i, name in enumerate(names):
        if name == "":
            raise HierarchyError(f"row {i}: empty node name")
        if name in index:
            raise HierarchyError(f"duplicate node name {name!r}")
        index[name] = i

    n = len(names)
    parent = np.full(n, -1, dtype=np.intp)
    for i, (_, p) in enumerate(edges):
        if p == "":
            continue
        if p not in index:
            raise HierarchyError(f"node {names[i]!r} has unknown parent {p!r}")
        parent[i] = index[p]

    # Each node has at most one parent, so any cycle is found by walking up.
    state = np.zeros(n, dtype=np.int8)  # 0 unseen, 1 on current walk, 2 done
    for start in range(n):
        walk = []
        u = start
        while u >= 0 and state[u] == 0:
            state[u] = 1
            walk.append(u)
            u = int(parent[u])
        if u >= 0 and state[u] == 1:
            cyc = [names[v] for v in walk[walk.index(u):]]
            raise HierarchyError("cycle detected: " + " -> ".join(cyc))
        for v in walk:
            state[v] = 2

    roots = np.flatnonzero(parent < 0)
    if len(roots) != 1:
        raise HierarchyError(f"expected exactly one root, found {len(roots)}: "
                             f"{[names[r] for r in roots]}")
    root = int(roots[0])

    kids = [[] for _ in range(n)]
    for v in range(n):
        if parent[v] >= 0:
            kids[parent[v]].append(v)
    children = tuple(tuple(k) for k in kids)

    if not allow_unary_chains:
        for u in range(n):
            if len(children[u]) == 1:
                raise HierarchyError(
                    f"node {names[u]!r} has a single child {names[children[u][0]]!r}; "
                    "information would not increase strictly along this edge "
                    "(pass allow_unary_chains to accept it)")

    order = []
    depth = np.zeros(n, dtype=np.intp)
    tin = np.zeros(n, dtype=np.intp)
    tout = np.zeros(n, dtype=np.intp)
    stack = [(root, False)]
    while stack:
        u, done = stack.pop()
        if done:
            tout[u] = len(order)
            continue
        tin[u] = len(order)
        order.append(u)
        stack.append((u, True))
        for v in reversed(children[u]):
            depth[v] = depth[u] + 1
            stack.append((v, False))
    order = np.array(order, dtype=np.intp)

    leaf_count = np.zeros(n, dtype=np.intp)
    for u in order[::-1]:
        leaf_count[u] = 1 if not children[u] else sum(leaf_count[v] for v in children[u])
    num_leaves = leaf_count[root]
    info = np.log(num_leaves) - np.log(leaf_count)
    info[root] = 0.0

    return Hierarchy(names=names, parent=parent, children=children, depth=depth,
                     leaf_count=leaf_count, info=info, root=root, order=order,
                     tin=tin, tout=tout)


def from_parents(parents: Sequence[int], names: Sequence[str] | None = None,
                 allow_unary_chains: bool = False) -> Hierarchy:
    """Build a hierarchy from a parent-index array (``-1`` marks the root)."""
    if names is None:
        names = [str(i) for i in range(len(parents))]
    edges = [(names[i], "" if p < 0 else names[p]) for i, p in enumerate(parents)]
    return build_hierarchy(edges, allow_unary_chains=allow_unary_chains)


def relations(h: Hierarchy, y: int) -> Relations:
    y = h._check(y)
    anc = frozenset(int(u) for u in h.path(y))
    desc = frozenset(int(v) for v in h.order[h.tin[y]:h.tout[y]])
    leaves = frozenset(v for v in desc if h.leaf_mask[v])
    if y == h.root:
        sib = frozenset([y])
    else:
        sib = frozenset(h.children[h.parent[y]])
    return Relations(anc, desc, leaves, sib)


def lca(h: Hierarchy, u, v):
    """Lowest common ancestor. Accepts scalars or broadcastable index arrays."""
    scalar = np.ndim(u) == 0 and np.ndim(v) == 0
    if scalar:
        h._check(u)
        h._check(v)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=np.intp), np.asarray(v, dtype=np.intp))
    u = u.copy()
    v = v.copy()
    # Lift the deeper node until depths agree, then lift both together.
    for _ in range(h.max_depth):
        du, dv = h.depth[u], h.depth[v]
        u = np.where(du > dv, h.parent[u], u)
        v = np.where(dv > du, h.parent[v], v)
    for _ in range(h.max_depth):
        differ = u != v
        if not differ.any():
            break
        u = np.where(differ, h.parent[u], u)
        v = np.where(differ, h.parent[v], v)
    return int(u) if scalar else u


def _check_len(h: Hierarchy, x: np.ndarray):
    if x.shape[-1] != h.num_nodes:
        raise ValueError(f"expected last dimension {h.num_nodes}, got {x.shape[-1]}")


def sum_over_descendants(h: Hierarchy, x) -> np.ndarray:
    """``out[..., y] = sum of x[..., v] over v in descendants(y)`` (the map x -> A x)."""
    x = np.asarray(x, dtype=float)
    _check_len(h, x)
    out = np.array(x, copy=True)
    for nodes in reversed(h.levels[1:]):
        np.add.at(out, (Ellipsis, h.parent[nodes]), out[..., nodes])
    return out


def sum_over_ancestors(h: Hierarchy, x) -> np.ndarray:
    """``out[..., y] = sum of x[..., u] over u in ancestors(y)`` (the map x -> A^T x)."""
    x = np.asarray(x, dtype=float)
    _check_len(h, x)
    out = np.array(x, copy=True)
    for nodes in h.levels[1:]:
        out[..., nodes] += out[..., h.parent[nodes]]
    return out


def sum_over_children(h: Hierarchy, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_len(h, x)
    out = np.zeros_like(x)
    nonroot = np.flatnonzero(h.parent >= 0)
    np.add.at(out, (Ellipsis, h.parent[nonroot]), x[..., nonroot])
    return out


def random_cuts(h: Hierarchy, p_cut: float, rng, size: int | None = None) -> np.ndarray:
    """Boolean membership masks of random cuts, shape ``(size, |Y|)`` or ``(|Y|,)``.

    One uniform draw per node (index order) decides whether that internal,
    non-root node truncates. The cut holds each truncating node or leaf that
    has no truncating strict ancestor. This has the same law as descending
    from the root and truncating each visited internal node with
    probability ``p_cut``.
    """
    if not 0.0 <= p_cut <= 1.0:
        raise ValueError(f"p_cut must lie in [0, 1], got {p_cut}")
    rng = np.random.default_rng(rng)
    shape = (1 if size is None else size, h.num_nodes)
    can_cut = ~h.leaf_mask
    can_cut[h.root] = False
    trunc = (rng.random(shape) < p_cut) & can_cut
    stop = trunc | h.leaf_mask
    blocked = sum_over_ancestors(h, trunc.astype(float)) - trunc > 0
    member = stop & ~blocked
    return member[0] if size is None else member


def random_cut(h: Hierarchy, p_cut: float, rng_seed=None) -> frozenset:
    """Antichain ``K`` covering every leaf exactly once (Stochastic Tree Sampling)."""
    mask = random_cuts(h, p_cut, rng_seed)
    return frozenset(int(v) for v in np.flatnonzero(mask))


def subtree_projection(h_full: Hierarchy, h_sub: Hierarchy) -> np.ndarray:
    """For every node of ``h_full``, the deepest ancestor whose name is in ``h_sub``.

    Returned as indices into ``h_sub``.
    """
    if h_full.names[h_full.root] != h_sub.names[h_sub.root]:
        raise HierarchyError("hierarchies do not share a root")
    for name in h_sub.names:
        if not h_full.has_name(name):
            raise HierarchyError(f"sub-tree node {name!r} missing from full hierarchy")
    out = np.full(h_full.num_nodes, -1, dtype=np.intp)
    for u in h_full.order:
        name = h_full.names[u]
        if h_sub.has_name(name):
            out[u] = h_sub.index(name)
        else:
            out[u] = out[h_full.parent[u]]
    return out


def project_to_subtree(h_full: Hierarchy, h_sub: Hierarchy, y: int, name_map=None) -> int:
    """Deepest ancestor of ``y`` (a node of ``h_full``) that exists in ``h_sub``.

    ``name_map`` may be a precomputed :func:`subtree_projection` array.
    """
    y = h_full._check(y)
    if name_map is None:
        name_map = subtree_projection(h_full, h_sub)
    return int(name_map[y])


def induced_subtree(h: Hierarchy, keep: Iterable[int], allow_unary_chains: bool = True) -> Hierarchy:
    """Hierarchy on ``keep`` closed under ancestors, preserving index order."""
    mask = np.zeros(h.num_nodes, dtype=bool)
    for v in keep:
        mask[h.path(v)] = True
    nodes = np.flatnonzero(mask)
    edges = [(h.names[v], "" if h.parent[v] < 0 else h.names[h.parent[v]]) for v in nodes]
    return build_hierarchy(edges, allow_unary_chains=allow_unary_chains)


def truncate(h: Hierarchy, level: int) -> Hierarchy:
    """Keep only the nodes with depth at most ``level``."""
    if level < 0:
        raise ValueError("level must be non-negative")
    return induced_subtree(h, np.flatnonzero(h.depth <= level), allow_unary_chains=True)


def ancestor_matrix(h: Hierarchy) -> np.ndarray:
    """Dense ``A[u, v] = [u is an ancestor of v]``. Only for small trees and tests."""
    idx = np.arange(h.num_nodes)
    return h.is_ancestor(idx[:, None], idx[None, :]).astype(float)
