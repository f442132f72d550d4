"""Pure-Python inference kernels; fallback when the compiled core is absent.

All kernels share the compiled core's calling convention: flat numpy arrays
plus the tree's traversal order, everything in log-space. The message-passing
routines are vectorized per node with numpy; the Gibbs sweep loop uses plain
Python floats because per-update arrays are tiny enough that interpreter
arithmetic beats numpy dispatch, and because mirroring the compiled loop's
operation order keeps the two backends' sample streams aligned.
"""

from __future__ import annotations

import math

import numpy as np


def _lse(x: np.ndarray) -> float:
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def _upward(parent, order, node_lp, edge_lp):
    """Leaves-to-root pass.

    Returns ``beta`` (n, d) with beta[v][i] = log-sum over the subtree of v of
    the product of its factors given label i at v, and ``msg`` (n, d) with
    msg[v][i] = log message from v to its parent for parent label i.
    """
    n, d = node_lp.shape
    beta = node_lp.copy()
    msg = np.zeros((n, d))
    for k in range(n - 1, -1, -1):
        v = order[k]
        p = parent[v]
        if p < 0:
            continue
        t = edge_lp[v] + beta[v][None, :]
        m = t.max(axis=1)
        msg[v] = m + np.log(np.exp(t - m[:, None]).sum(axis=1))
        beta[p] += msg[v]
    return beta, msg


def log_partition(parent, order, node_lp, edge_lp) -> float:
    beta, _ = _upward(parent, order, node_lp, edge_lp)
    return _lse(beta[order[0]])


def marginals(parent, order, node_lp, edge_lp):
    """Exact node and edge marginals via an upward and a downward pass.

    Returns (log_partition, node_marginals (n, d), edge_marginals (n, d, d));
    the edge slot of the root is left zero.
    """
    n, d = node_lp.shape
    beta, msg = _upward(parent, order, node_lp, edge_lp)
    log_z = _lse(beta[order[0]])

    above = np.zeros((n, d))  # above[v][i]: log-sum of everything outside v's subtree
    edge_marg = np.zeros((n, d, d))
    for k in range(n):
        v = order[k]
        p = parent[v]
        if p < 0:
            continue
        base = beta[p] - msg[v] + above[p]
        t = base[:, None] + edge_lp[v]
        m = t.max(axis=0)
        above[v] = m + np.log(np.exp(t - m[None, :]).sum(axis=0))
        edge_marg[v] = np.exp(t + beta[v][None, :] - log_z)
    node_marg = np.exp(beta + above - log_z)
    return log_z, node_marg, edge_marg


def map_decode(parent, order, node_lp, edge_lp):
    """Most probable assignment via max-sum with back-pointers.

    Ties resolve to the lowest label index at every maximization (argmax of a
    numpy array returns the first maximizer).
    """
    n, d = node_lp.shape
    best = node_lp.copy()
    back = np.zeros((n, d), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        v = order[k]
        p = parent[v]
        if p < 0:
            continue
        t = edge_lp[v] + best[v][None, :]
        back[v] = t.argmax(axis=1)
        best[p] += t[np.arange(d), back[v]]

    labels = np.zeros(n, dtype=np.int64)
    root = order[0]
    labels[root] = best[root].argmax()
    score = float(best[root][labels[root]])
    for k in range(1, n):
        v = order[k]
        labels[v] = back[v][labels[parent[v]]]
    return labels, score


def gibbs_sweeps(parent, child_ptr, child_idx, node_lp, edge_lp, init, uniforms, burn_in, thinning, num_samples):
    """Systematic-scan Gibbs sweeps; returns (num_samples, n) int64 labels.

    One sweep resamples nodes 0..n-1 in order, each from its exact full
    conditional. uniforms[s, v] drives the update of node v in sweep s.
    """
    n, d = node_lp.shape
    parent = parent.tolist()
    node = node_lp.tolist()
    edge = edge_lp.tolist()
    children = [child_idx[child_ptr[v] : child_ptr[v + 1]].tolist() for v in range(n)]
    y = init.tolist()

    out = np.empty((num_samples, n), dtype=np.int64)
    kept = 0
    total = burn_in + num_samples * thinning
    exp = math.exp
    for sweep in range(total):
        urow = uniforms[sweep]
        for v in range(n):
            lg = list(node[v])
            p = parent[v]
            if p >= 0:
                row = edge[v][y[p]]
                for i in range(d):
                    lg[i] += row[i]
            for c in children[v]:
                tab = edge[c]
                yc = y[c]
                for i in range(d):
                    lg[i] += tab[i][yc]
            m = lg[0]
            for i in range(1, d):
                if lg[i] > m:
                    m = lg[i]
            tot = 0.0
            w = [0.0] * d
            for i in range(d):
                wi = exp(lg[i] - m)
                w[i] = wi
                tot += wi
            u = urow[v] * tot
            acc = 0.0
            lab = d - 1
            for i in range(d):
                acc += w[i]
                if u < acc:
                    lab = i
                    break
            y[v] = lab
        if sweep >= burn_in and (sweep + 1 - burn_in) % thinning == 0:
            out[kept] = y
            kept += 1
    return out
