"""Reverse-mode autodiff tape over numpy arrays."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError


class Var:
    """A node in the computation tape: an array value plus a backward closure."""

    __slots__ = ("data", "grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), backward=None, name: str = ""):
        self.data = np.asarray(data)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def backward(self, seed=None):
        """Backpropagate from this node; seeds with ones when omitted."""
        if seed is None:
            seed = np.ones_like(self.data)
        order = _toposort(self)
        self.accumulate(np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Var(shape={self.data.shape}, dtype={self.data.dtype}, name={self.name!r})"


def _toposort(root: Var):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def const(data, dtype=None) -> Var:
    """Wrap an array that never needs gradients."""
    arr = np.asarray(data, dtype=dtype)
    return Var(arr)


def check_finite(x, what: str = "tensor"):
    """Raise NumericError when the value contains NaN or Inf."""
    data = x.data if isinstance(x, Var) else np.asarray(x)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values in {what}")
    return x
