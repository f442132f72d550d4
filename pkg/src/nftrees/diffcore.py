"""Reverse-mode differentiation over dense float64 arrays with an explicit tape.

The engine is deliberately small: just the operations needed to run gated
message passing, the affine factor heads, and to receive externally computed
loss gradients via :meth:`Tape.inject_gradient`. A tape records operations in
execution order; the backward pass replays them in exact reverse order.
Gradients accumulate into ``Tensor.grad`` until explicitly zeroed, which is
what lets per-tree contributions sum into shared parameters.

Concurrency contract: a tape and the tensors it created belong to one thread.
Parameter tensors may be shared read-only between tapes, but their ``grad``
buffers must then only be touched by one backward pass at a time.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ShapeError


class Tensor:
    """Dense float64 array, optionally carrying a same-shape gradient buffer.

    ``grad`` is allocated iff ``requires_grad`` and accumulates across
    backward passes; call :meth:`zero_grad` between optimization steps.
    """

    __slots__ = ("values", "grad", "requires_grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.values) if self.requires_grad else None

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={tuple(self.values.shape)}, requires_grad={self.requires_grad})"


class _Record:
    __slots__ = ("output", "backward")

    def __init__(self, output, backward):
        self.output = output
        self.backward = backward


class Tape:
    """Ordered record of executed operations plus pending backward seeds.

    Every operation method validates shapes, computes the forward value into
    fresh storage, and, when any input requires gradients, appends a backward
    rule. ``backward()`` replays the rules in reverse, carrying a per-replay
    gradient map so that repeated backward calls never double-count earlier
    seeds; the replay's results are then added into each tensor's ``grad``.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._pending: dict[Tensor, np.ndarray] = {}

    def __len__(self):
        return len(self._records)

    # -- recording ---------------------------------------------------------

    def _emit(self, values, inputs, backward) -> Tensor:
        out = Tensor(values, requires_grad=any(t.requires_grad for t in inputs))
        if out.requires_grad:
            self._records.append(_Record(out, backward))
        return out

    @staticmethod
    def constant(values) -> Tensor:
        """Untracked tensor (inputs, adjacency masks, ...)."""
        return Tensor(values, requires_grad=False)

    # -- operations ----------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {tuple(a.shape)} and {tuple(b.shape)}")

        def backward(g, acc):
            acc(a, g @ b.values.T)
            acc(b, a.values.T @ g)

        return self._emit(a.values @ b.values, (a, b), backward)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        self._require_same_shape("add", a, b)

        def backward(g, acc):
            acc(a, g)
            acc(b, g)

        return self._emit(a.values + b.values, (a, b), backward)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        self._require_same_shape("mul", a, b)

        def backward(g, acc):
            acc(a, g * b.values)
            acc(b, g * a.values)

        return self._emit(a.values * b.values, (a, b), backward)

    def sigmoid(self, a: Tensor) -> Tensor:
        with np.errstate(over="ignore"):
            s = 1.0 / (1.0 + np.exp(-a.values))

        def backward(g, acc):
            acc(a, g * s * (1.0 - s))

        return self._emit(s, (a,), backward)

    def tanh(self, a: Tensor) -> Tensor:
        t = np.tanh(a.values)

        def backward(g, acc):
            acc(a, g * (1.0 - t * t))

        return self._emit(t, (a,), backward)

    def one_minus(self, a: Tensor) -> Tensor:
        def backward(g, acc):
            acc(a, -g)

        return self._emit(1.0 - a.values, (a,), backward)

    def concat(self, a: Tensor, b: Tensor) -> Tensor:
        """Join two vectors, or two matrices with equal row counts column-wise."""
        if a.values.ndim == 1 and b.values.ndim == 1:
            m = a.shape[0]

            def backward(g, acc):
                acc(a, g[:m])
                acc(b, g[m:])

            return self._emit(np.concatenate([a.values, b.values]), (a, b), backward)
        if a.values.ndim == 2 and b.values.ndim == 2 and a.shape[0] == b.shape[0]:
            m = a.shape[1]

            def backward(g, acc):
                acc(a, g[:, :m])
                acc(b, g[:, m:])

            return self._emit(np.concatenate([a.values, b.values], axis=1), (a, b), backward)
        raise ShapeError(f"concat: incompatible shapes {tuple(a.shape)} and {tuple(b.shape)}")

    def add_row(self, m: Tensor, row: Tensor) -> Tensor:
        """Add a length-k vector to every row of an (n, k) matrix (bias add)."""
        if m.values.ndim != 2 or row.values.ndim != 1 or m.shape[1] != row.shape[0]:
            raise ShapeError(f"add_row: incompatible shapes {tuple(m.shape)} and {tuple(row.shape)}")

        def backward(g, acc):
            acc(m, g)
            acc(row, g.sum(axis=0))

        return self._emit(m.values + row.values, (m, row), backward)

    def reshape(self, a: Tensor, shape) -> Tensor:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape, dtype=np.int64)) != a.values.size:
            raise ShapeError(f"reshape: cannot view {tuple(a.shape)} as {shape}")
        src_shape = a.values.shape

        def backward(g, acc):
            acc(a, g.reshape(src_shape))

        return self._emit(a.values.reshape(shape), (a,), backward)

    def sum(self, a: Tensor) -> Tensor:
        src_shape = a.values.shape

        def backward(g, acc):
            acc(a, np.full(src_shape, float(g)))

        return self._emit(np.sum(a.values), (a,), backward)

    # -- backward ------------------------------------------------------------

    def inject_gradient(self, t: Tensor, g) -> None:
        """Register ``g`` as a seed gradient for ``t``; the next backward()
        propagates it through the operations recorded below ``t``."""
        g = np.asarray(g, dtype=np.float64)
        if g.shape != t.values.shape:
            raise ShapeError(f"inject_gradient: seed shape {g.shape} != tensor shape {tuple(t.shape)}")
        cur = self._pending.get(t)
        self._pending[t] = g.copy() if cur is None else cur + g

    def backward(self, root: Tensor | None = None) -> None:
        """Propagate pending seeds (plus an optional scalar root seeded with 1)
        through the tape in reverse recording order."""
        if root is not None:
            if root.values.size != 1:
                raise ContractError(f"backward root must be scalar, got shape {tuple(root.shape)}")
            self.inject_gradient(root, np.ones_like(root.values))
        if not self._records:
            raise ContractError("backward on an empty tape")

        flow = self._pending
        self._pending = {}

        def acc(t, g):
            if not t.requires_grad:
                return
            cur = flow.get(t)
            if cur is None:
                flow[t] = np.array(g, dtype=np.float64, copy=True)
            else:
                cur += g

        for rec in reversed(self._records):
            g = flow.get(rec.output)
            if g is not None:
                rec.backward(g, acc)
        for t, g in flow.items():
            if t.grad is not None:
                t.grad += g

    # -- helpers ---------------------------------------------------------------

    @staticmethod
    def _require_same_shape(op, a, b):
        if a.values.shape != b.values.shape:
            raise ShapeError(f"{op}: operand shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()
