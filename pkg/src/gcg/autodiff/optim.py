from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gcg.autodiff.params import ParamStore
from gcg.errors import TrainingError


@dataclass
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = None  # global-norm clip, off by default


def adam_step(store: ParamStore, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, grad_clip: float | None = None) -> ParamStore:
    """Bias-corrected Adam update in place; gradients are zeroed afterwards."""
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name!r}")
    scale = 1.0
    if grad_clip is not None:
        norm = np.sqrt(sum(float(np.vdot(g, g)) for g in store.grads.values()))
        if norm > grad_clip:
            scale = grad_clip / norm
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        g = store.grads[name] * scale if scale != 1.0 else store.grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype, copy=False)
    store.zero_grad()
    return store
