"""Tensor with a dynamically recorded graph for reverse-mode differentiation."""
from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..errors import UsageError

DTYPE = np.float64


class Tensor:
    """An ndarray plus the bookkeeping needed to backpropagate through it.

    Operations on tensors are recorded only when at least one operand has
    ``requires_grad`` set, so inference over frozen parameters builds no graph.
    Gradients accumulate across repeated ``backward`` calls; the trainer is
    responsible for zeroing them between steps.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _parents: Sequence["Tensor"] = (),
        _backward: Optional[Callable[[np.ndarray], None]] = None,
    ):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = tuple(_parents)
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from .functional import add

        return add(self, other)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Backpropagate through the recorded graph.

        Without ``grad`` the tensor must be a scalar and is seeded with 1; a
        non-scalar output needs an explicit same-shape seed. Leaf gradients
        accumulate across calls, intermediate ones are recomputed each time.
        """
        if not self.requires_grad:
            raise UsageError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1 or self.data.ndim > 1:
                raise UsageError(f"backward() needs a scalar tensor, got shape {self.shape}")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=DTYPE)
            if grad.shape != self.shape:
                raise UsageError(f"seed gradient shape {grad.shape} != tensor shape {self.shape}")

        order = _topological_order(self)
        for node in order:
            if node._backward is not None:
                node.grad = None
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _topological_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def make_result(data: np.ndarray, parents: Iterable[Tensor], backward) -> Tensor:
    """Wrap ``data`` as an op output, recording ``backward`` only if needed."""
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(data)


def parameter(data, name: Optional[str] = None) -> Tensor:
    return Tensor(np.array(data, dtype=DTYPE, copy=True), requires_grad=True, name=name)
