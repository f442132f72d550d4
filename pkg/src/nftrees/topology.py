"""Rooted-tree bookkeeping shared by tree containers and the inference kernels.

Trees are stored as a parent array: ``parent[v]`` is the index of v's parent
and the single root carries the sentinel ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructureError

ROOT = -1


@dataclass(frozen=True)
class TreeStructure:
    """Derived, validated view of a parent array.

    ``order`` lists every node with parents before children (root first).
    ``child_ptr``/``child_idx`` form a CSR layout of the children lists,
    children in ascending index order.
    """

    root: int
    order: np.ndarray
    child_ptr: np.ndarray
    child_idx: np.ndarray


def analyze_parent(parent) -> TreeStructure:
    """Validate a parent array and derive traversal structures.

    Raises StructureError unless the array encodes exactly one root and a
    connected acyclic tree over all nodes.
    """
    parent = np.asarray(parent, dtype=np.int64)
    if parent.ndim != 1 or parent.size == 0:
        raise StructureError(f"parent array must be non-empty and rank-1, got shape {parent.shape}")
    n = parent.size
    roots = np.flatnonzero(parent == ROOT)
    if roots.size != 1:
        raise StructureError(f"expected exactly one root sentinel, found {roots.size}")
    root = int(roots[0])
    bad = np.flatnonzero((parent < ROOT) | (parent >= n) | (parent == np.arange(n)))
    if bad.size:
        raise StructureError(f"invalid parent entry {parent[bad[0]]} at node {bad[0]}")

    counts = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if v != root:
            counts[parent[v]] += 1
    child_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=child_ptr[1:])
    child_idx = np.empty(n - 1, dtype=np.int64)
    fill = child_ptr[:-1].copy()
    for v in range(n):  # ascending v keeps each child list sorted
        p = parent[v]
        if p != ROOT:
            child_idx[fill[p]] = v
            fill[p] += 1

    order = np.empty(n, dtype=np.int64)
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        v = order[head]
        head += 1
        lo, hi = child_ptr[v], child_ptr[v + 1]
        order[tail : tail + (hi - lo)] = child_idx[lo:hi]
        tail += hi - lo
    if tail != n:
        raise StructureError("parent array is cyclic or disconnected")
    return TreeStructure(root=root, order=order, child_ptr=child_ptr, child_idx=child_idx)


def adjacency(parent) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix of the undirected tree."""
    parent = np.asarray(parent, dtype=np.int64)
    n = parent.size
    adj = np.zeros((n, n), dtype=np.float64)
    for v in range(n):
        p = parent[v]
        if p != ROOT:
            adj[v, p] = 1.0
            adj[p, v] = 1.0
    return adj
