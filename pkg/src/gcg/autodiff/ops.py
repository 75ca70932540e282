"""Elementwise, reduction and shape primitives, activations and loss heads."""

from __future__ import annotations

import numpy as np

from gcg.autodiff.tape import Tensor, as_tensor, emit
from gcg.errors import ConfigError

PROB_EPS = 1e-6


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return emit(
        "add", (a, b), a.value + b.value,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return emit(
        "sub", (a, b), a.value - b.value,
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return emit(
        "mul", (a, b), a.value * b.value,
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def square(a) -> Tensor:
    a = as_tensor(a)
    return emit("square", (a,), a.value * a.value, lambda g: (2.0 * a.value * g,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return emit("log", (a,), np.log(a.value), lambda g: (g / a.value,))


def sum(a, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    out = a.value.sum(axis=axis)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return emit("sum", (a,), out, backward)


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.value.size
    return emit("mean", (a,), a.value.mean(), lambda g: (np.full(a.shape, g / n, dtype=a.value.dtype),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return emit("reshape", (a,), a.value.reshape(shape), lambda g: (g.reshape(a.shape),))


def stack(tensors, axis=1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.value for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return emit("stack", tensors, out, backward)


def unstack(a, axis=1) -> tuple[Tensor, ...]:
    """Split along ``axis`` into separate tensors (inverse of :func:`stack`)."""
    a = as_tensor(a)
    n = a.shape[axis]
    parts = tuple(np.take(a.value, i, axis=axis) for i in range(n))

    def backward(*gs):
        return (np.stack(gs, axis=axis),)

    return emit("unstack", (a,), parts, backward)


def repeat_rows(a, k: int) -> Tensor:
    """Repeat each row ``k`` times: (B, ...) -> (B*k, ...)."""
    a = as_tensor(a)
    out = np.repeat(a.value, k, axis=0)

    def backward(g):
        return (g.reshape((a.shape[0], k) + a.shape[1:]).sum(axis=1),)

    return emit("repeat_rows", (a,), out, backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return emit("relu", (a,), a.value * mask, lambda g: (g * mask,))


def _sigmoid(x):
    # tanh form: no overflow for large |x| and no boolean indexing
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.value)
    return emit("sigmoid", (a,), s, lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.value)
    return emit("tanh", (a,), t, lambda g: (g * (1.0 - t * t),))


def survival_probs(logits) -> Tensor:
    """Cumulative event probabilities 1 - prod_{i<=h}(1 - sigmoid(z_i)) along axis 1.

    Nondecreasing in h by construction.
    """
    z = as_tensor(logits)
    s = _sigmoid(z.value)
    # log(1 - sigmoid(z)) = -softplus(z)
    log_q = -np.logaddexp(0.0, z.value)
    surv = np.exp(np.cumsum(log_q, axis=1))
    out = 1.0 - surv

    def backward(g):
        # d out_h / d z_i = surv_h * s_i  for i <= h
        tail = np.cumsum((g * surv)[:, ::-1], axis=1)[:, ::-1]
        return (s * tail,)

    return emit("survival_probs", (z,), out, backward)


def bce(prob, target, weight) -> Tensor:
    """Weighted binary cross-entropy summed over all elements.

    Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before the log;
    the clamp passes no gradient where it is active.
    """
    p = as_tensor(prob)
    y = np.asarray(target, dtype=p.value.dtype)
    w = np.asarray(weight, dtype=p.value.dtype)
    if y.shape != p.shape:
        raise ConfigError(f"bce target shape {y.shape} != prediction shape {p.shape}")
    pc = np.clip(p.value, PROB_EPS, 1.0 - PROB_EPS)
    inside = (p.value >= PROB_EPS) & (p.value <= 1.0 - PROB_EPS)
    per = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    out = np.asarray((w * per).sum(), dtype=p.value.dtype)

    def backward(g):
        dp = w * (-(y / pc) + (1.0 - y) / (1.0 - pc)) * inside
        return (g * dp,)

    return emit("bce", (p,), out, backward)


def mse(pred, target, weight) -> Tensor:
    """Weighted squared error summed over all elements."""
    p = as_tensor(pred)
    y = np.asarray(target, dtype=p.value.dtype)
    w = np.asarray(weight, dtype=p.value.dtype)
    if y.shape != p.shape:
        raise ConfigError(f"mse target shape {y.shape} != prediction shape {p.shape}")
    diff = p.value - y
    out = np.asarray((w * diff * diff).sum(), dtype=p.value.dtype)
    return emit("mse", (p,), out, lambda g: (g * 2.0 * w * diff,))
