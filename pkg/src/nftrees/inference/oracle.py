"""Brute-force enumeration over all label assignments.

Ground truth for the fast message-passing kernels: the joint table is built
by direct broadcast-summation of every factor over the full d^n assignment
space, so it shares no code with the tree recursions it validates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CapacityError
from ..topology import ROOT

ENUMERATION_CAP = 10_000_000


@dataclass
class OracleResult:
    """Exhaustive summary of one CRF's distribution.

    ``joint`` has shape (d,)*n with axis v indexing node v's label;
    ``edge_marginals[v]`` is oriented (parent label, child label).
    """

    log_partition: float
    joint: np.ndarray
    node_marginals: np.ndarray
    edge_marginals: np.ndarray
    map_labels: np.ndarray
    map_score: float


def enumerate_oracle(crf, cap: int = ENUMERATION_CAP) -> OracleResult:
    n, d = crf.num_nodes, crf.num_labels
    if d**n > cap:
        raise CapacityError(f"{d}^{n} assignments exceed the enumeration cap {cap}")

    total = np.zeros((d,) * n)
    for v in range(n):
        shape = [1] * n
        shape[v] = d
        total += crf.node_logpot[v].reshape(shape)
    for v in crf.edges:
        p = int(crf.parent[v])
        shape = [1] * n
        shape[p] = d
        shape[v] = d
        table = crf.edge_logpot[v] if p < v else crf.edge_logpot[v].T
        total += table.reshape(shape)

    m = total.max()
    log_z = float(m + np.log(np.exp(total - m).sum()))
    joint = np.exp(total - log_z)

    axes = tuple(range(n))
    node_marg = np.zeros((n, d))
    for v in range(n):
        node_marg[v] = joint.sum(axis=tuple(a for a in axes if a != v))
    edge_marg = np.zeros((n, d, d))
    for v in crf.edges:
        p = int(crf.parent[v])
        pair = joint.sum(axis=tuple(a for a in axes if a not in (p, v)))
        edge_marg[v] = pair if p < v else pair.T

    flat_best = int(np.argmax(total))
    map_labels = np.array(np.unravel_index(flat_best, total.shape), dtype=np.int64)
    return OracleResult(
        log_partition=log_z,
        joint=joint,
        node_marginals=node_marg,
        edge_marginals=edge_marg,
        map_labels=map_labels,
        map_score=float(total.reshape(-1)[flat_best]),
    )


def empirical_joint(samples, num_nodes: int, num_labels: int) -> np.ndarray:
    """Sample frequencies as a (d,)*n probability table."""
    samples = np.asarray(samples, dtype=np.int64)
    table = np.zeros((num_labels,) * num_nodes)
    if samples.size == 0:
        return table
    flat = np.ravel_multi_index(tuple(samples.T), table.shape)
    np.add.at(table.reshape(-1), flat, 1.0)
    return table / samples.shape[0]


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())
