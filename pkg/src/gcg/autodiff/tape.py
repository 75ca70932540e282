"""Tensors and the Wengert-list tape used for reverse-mode differentiation.

Ops are recorded only while a :class:`Tape` is active on the current thread
and at least one input requires a gradient.  Outside a tape every op is a
plain numpy computation, which is what planning uses.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from gcg.errors import UsageError

_local = threading.local()


class Tensor:
    """A value plus an optional gradient slot.

    Leaf tensors created by :meth:`ParamStore.tensor` share their ``grad``
    array with the store, so backprop accumulates straight into it.
    """

    __slots__ = ("value", "grad", "requires_grad", "leaf", "name")

    def __init__(self, value, requires_grad: bool = False, grad=None, leaf: bool = False, name=None):
        self.value = np.asarray(value)
        self.grad = grad
        self.requires_grad = requires_grad
        self.leaf = leaf
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.value.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Op:
    name: str
    inputs: tuple[Tensor, ...]
    outputs: tuple[Tensor, ...]
    backward: Callable[..., Sequence[np.ndarray | None]]


class Tape:
    """Ordered record of the primitive ops executed during a forward pass."""

    def __init__(self):
        self.ops: list[_Op] = []

    def __len__(self):
        return len(self.ops)

    def __enter__(self) -> "Tape":
        stack = _stack()
        stack.append(self)
        return self

    def __exit__(self, *exc):
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, name, inputs, outputs, backward) -> None:
        self.ops.append(_Op(name, tuple(inputs), tuple(outputs), backward))

    def backward(self, loss: Tensor, seed=None) -> None:
        """Replay the chain rule from ``loss`` back to every leaf.

        Leaf gradients accumulate across calls; intermediate gradients are
        reset first so replaying the same tape twice doubles the leaves.
        """
        if not self.ops:
            raise UsageError("backprop on an empty tape")
        for op in self.ops:
            for t in op.outputs:
                if not t.leaf:
                    t.grad = None
        if seed is None:
            if loss.value.size != 1:
                raise UsageError("a seed gradient is required for a non-scalar output")
            seed = np.ones_like(loss.value)
        loss.grad = np.asarray(seed, dtype=loss.value.dtype).reshape(loss.value.shape)

        for op in reversed(self.ops):
            out_grads = [t.grad for t in op.outputs]
            if all(g is None for g in out_grads):
                continue
            out_grads = [np.zeros_like(t.value) if g is None else g for t, g in zip(op.outputs, out_grads)]
            in_grads = op.backward(*out_grads)
            for t, g in zip(op.inputs, in_grads):
                if g is None or not t.requires_grad:
                    continue
                if t.leaf:
                    t.grad += g
                elif t.grad is None:
                    t.grad = g
                else:
                    t.grad = t.grad + g


def _stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def backprop(tape: Tape, loss: Tensor, seed=None) -> None:
    tape.backward(loss, seed)


def emit(name: str, inputs: Sequence[Tensor], values, backward) -> Tensor | tuple[Tensor, ...]:
    """Wrap op results as tensors and record the op if a tape is listening."""
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    multi = isinstance(values, tuple)
    outs = tuple(Tensor(v, requires_grad=track) for v in (values if multi else (values,)))
    if track:
        tape.record(name, inputs, outs, backward)
    return outs if multi else outs[0]
