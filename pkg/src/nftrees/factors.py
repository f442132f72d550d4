"""Factor tables over a rooted tree and the affine heads that produce them.

A :class:`TreeCRF` holds one length-d log-potential vector per node and one
d x d log-potential table per edge, with the first table index always the
parent's label. Head outputs are interpreted directly as log-potentials:
the affine maps are unconstrained in sign, and inference works entirely in
log-space, so any real-valued output is a valid factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Tape, Tensor
from .errors import FormatError, ShapeError, StructureError
from .topology import ROOT, analyze_parent


@dataclass
class HeadParams:
    """Affine maps from embeddings to factor tables.

    node head: R^h -> R^d; edge head: R^{2h} -> R^{d*d} applied to the
    parent embedding concatenated before the child embedding.
    """

    node_w: Tensor  # (h, d)
    node_b: Tensor  # (d,)
    edge_w: Tensor  # (2h, d*d)
    edge_b: Tensor  # (d*d,)

    @property
    def hidden_size(self) -> int:
        return self.node_w.shape[0]

    @property
    def num_labels(self) -> int:
        return self.node_w.shape[1]

    def named(self):
        return [
            ("heads.node_w", self.node_w),
            ("heads.node_b", self.node_b),
            ("heads.edge_w", self.edge_w),
            ("heads.edge_b", self.edge_b),
        ]


def init_heads(hidden_size: int, num_labels: int, rng: np.random.Generator) -> HeadParams:
    """Fan-in-scaled uniform init, gradients enabled."""
    if num_labels < 2:
        raise ShapeError(f"need at least 2 labels, got {num_labels}")

    def u(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

    h, d = hidden_size, num_labels
    return HeadParams(
        node_w=u(h, (h, d)),
        node_b=u(h, (d,)),
        edge_w=u(2 * h, (2 * h, d * d)),
        edge_b=u(2 * h, (d * d,)),
    )


class TreeCRF:
    """Materialized Gibbs distribution over node labels of one rooted tree.

    ``edge_logpot[v]`` is the table for the edge (parent[v], v); the root's
    slot is present but unused. Construction validates the topology and the
    finiteness of every entry. When built from tape-recorded head outputs the
    source tensors are retained so training can inject loss gradients.
    """

    def __init__(self, parent, node_logpot, edge_logpot, *, node_src=None, edge_src=None, edge_children=None):
        self.parent = np.asarray(parent, dtype=np.int64)
        struct = analyze_parent(self.parent)
        self.root = struct.root
        self.order = struct.order
        self.child_ptr = struct.child_ptr
        self.child_idx = struct.child_idx

        self.node_logpot = np.ascontiguousarray(node_logpot, dtype=np.float64)
        self.edge_logpot = np.ascontiguousarray(edge_logpot, dtype=np.float64)
        n = self.parent.size
        if self.node_logpot.ndim != 2 or self.node_logpot.shape[0] != n:
            raise ShapeError(f"node log-potentials must be (num_nodes, d), got {self.node_logpot.shape}")
        d = self.node_logpot.shape[1]
        if d < 2:
            raise ShapeError(f"need at least 2 labels, got {d}")
        if self.edge_logpot.shape != (n, d, d):
            raise ShapeError(
                f"edge log-potentials must be {(n, d, d)}, got {self.edge_logpot.shape}"
            )
        if not np.isfinite(self.node_logpot).all() or not np.isfinite(self.edge_logpot).all():
            raise ShapeError("log-potentials must be finite")

        # tape-recorded head outputs, for gradient injection during training
        self.node_src = node_src
        self.edge_src = edge_src
        self.edge_children = edge_children

    @property
    def num_nodes(self) -> int:
        return self.parent.size

    @property
    def num_labels(self) -> int:
        return self.node_logpot.shape[1]

    @property
    def edges(self) -> np.ndarray:
        """Child indices of all edges, ascending."""
        return np.flatnonzero(self.parent != ROOT)


def node_factor(tape: Tape, embedding: Tensor, heads: HeadParams) -> Tensor:
    """Log-potential vector for one node from its embedding."""
    e = tape.reshape(embedding, (1, heads.hidden_size))
    out = tape.add_row(tape.matmul(e, heads.node_w), heads.node_b)
    return tape.reshape(out, (heads.num_labels,))


def edge_factor(tape: Tape, parent_emb: Tensor, child_emb: Tensor, heads: HeadParams) -> Tensor:
    """d x d log-potential table for one edge; rows index the parent's label."""
    d = heads.num_labels
    pair = tape.reshape(tape.concat(parent_emb, child_emb), (1, 2 * heads.hidden_size))
    out = tape.add_row(tape.matmul(pair, heads.edge_w), heads.edge_b)
    return tape.reshape(out, (d, d))


def build_crf(tape: Tape, tree, embeddings: Tensor, heads: HeadParams, baseline: bool = False) -> TreeCRF:
    """Assemble the full factor set for one tree.

    One node factor per vertex and one edge factor per tree edge, computed by
    batched affine maps so the tape stays short. With ``baseline=True`` the
    edge head is skipped and every edge table is zero, which factorizes the
    distribution into independent per-node terms.
    """
    parent = np.asarray(getattr(tree, "parent", tree), dtype=np.int64)
    n = parent.size
    if embeddings.values.ndim != 2 or embeddings.shape[0] != n:
        raise ShapeError(f"embeddings must be ({n}, h), got {tuple(embeddings.shape)}")
    d = heads.num_labels

    node_logits = tape.add_row(tape.matmul(embeddings, heads.node_w), heads.node_b)

    children = np.flatnonzero(parent != ROOT)
    edge_logpot = np.zeros((n, d, d))
    edge_logits = None
    if children.size and not baseline:
        sel_par = np.zeros((children.size, n))
        sel_chi = np.zeros((children.size, n))
        sel_par[np.arange(children.size), parent[children]] = 1.0
        sel_chi[np.arange(children.size), children] = 1.0
        pair = tape.concat(
            tape.matmul(tape.constant(sel_par), embeddings),
            tape.matmul(tape.constant(sel_chi), embeddings),
        )
        edge_logits = tape.add_row(tape.matmul(pair, heads.edge_w), heads.edge_b)
        edge_logpot[children] = edge_logits.values.reshape(children.size, d, d)

    return TreeCRF(
        parent,
        node_logits.values,
        edge_logpot,
        node_src=node_logits,
        edge_src=edge_logits,
        edge_children=children,
    )


def reroot(crf: TreeCRF, new_root: int) -> TreeCRF:
    """Re-orient the tree at ``new_root``; flipped edges get transposed tables.

    The resulting CRF defines the identical joint distribution.
    """
    n = crf.num_nodes
    if not 0 <= new_root < n:
        raise StructureError(f"new root {new_root} out of range for {n} nodes")
    neighbors = [[] for _ in range(n)]
    for c in crf.edges:
        p = crf.parent[c]
        neighbors[p].append(c)
        neighbors[c].append(p)

    new_parent = np.full(n, ROOT, dtype=np.int64)
    new_edge = np.zeros_like(crf.edge_logpot)
    seen = np.zeros(n, dtype=bool)
    seen[new_root] = True
    queue = [new_root]
    while queue:
        u = queue.pop()
        for v in neighbors[u]:
            if seen[v]:
                continue
            seen[v] = True
            new_parent[v] = u
            # original orientation: the stored table lives at the original child
            if crf.parent[v] == u:
                new_edge[v] = crf.edge_logpot[v]
            else:
                new_edge[v] = crf.edge_logpot[u].T
            queue.append(v)
    return TreeCRF(new_parent, crf.node_logpot.copy(), new_edge)


# -- serialization: structured text, full-precision floats --------------------

_CRF_MAGIC = "treecrf"
_CRF_VERSION = 1


def serialize_crf(crf: TreeCRF) -> str:
    lines = [f"{_CRF_MAGIC} {_CRF_VERSION}"]
    lines.append(f"nodes {crf.num_nodes}")
    lines.append(f"labels {crf.num_labels}")
    lines.append("parent " + " ".join(str(int(p)) for p in crf.parent))
    for v in range(crf.num_nodes):
        lines.append(f"nodepot {v} " + " ".join(repr(float(x)) for x in crf.node_logpot[v]))
    for v in crf.edges:
        flat = crf.edge_logpot[v].reshape(-1)
        lines.append(f"edgepot {v} " + " ".join(repr(float(x)) for x in flat))
    return "\n".join(lines) + "\n"


def parse_crf(text: str) -> TreeCRF:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != [_CRF_MAGIC, str(_CRF_VERSION)]:
        raise FormatError(f"expected header '{_CRF_MAGIC} {_CRF_VERSION}'")

    def expect(idx, key, count=None):
        if idx >= len(lines):
            raise FormatError(f"truncated CRF text: missing '{key}' line")
        parts = lines[idx].split()
        if parts[0] != key:
            raise FormatError(f"line {idx + 1}: expected '{key}', got '{parts[0]}'")
        if count is not None and len(parts) - 1 != count:
            raise FormatError(f"line {idx + 1}: expected {count} fields after '{key}'")
        return parts[1:]

    n = int(expect(1, "nodes", 1)[0])
    d = int(expect(2, "labels", 1)[0])
    parent = np.array([int(x) for x in expect(3, "parent", n)], dtype=np.int64)
    node_lp = np.zeros((n, d))
    row = 4
    for v in range(n):
        fields = expect(row, "nodepot", d + 1)
        if int(fields[0]) != v:
            raise FormatError(f"line {row + 1}: node potentials out of order")
        node_lp[v] = [float(x) for x in fields[1:]]
        row += 1
    edge_lp = np.zeros((n, d, d))
    for v in range(n):
        if parent[v] == ROOT:
            continue
        fields = expect(row, "edgepot", d * d + 1)
        if int(fields[0]) != v:
            raise FormatError(f"line {row + 1}: edge potentials out of order")
        edge_lp[v] = np.array([float(x) for x in fields[1:]]).reshape(d, d)
        row += 1
    if row != len(lines):
        raise FormatError(f"line {row + 1}: unexpected trailing content")
    return TreeCRF(parent, node_lp, edge_lp)
