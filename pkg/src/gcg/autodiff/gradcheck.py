"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable

import numpy as np

from gcg.autodiff.params import ParamStore
from gcg.autodiff.tape import Tape, Tensor


def numeric_grad(f: Callable[[], float], arr: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``f()`` w.r.t. every entry of ``arr`` (perturbed in place)."""
    out = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        fp = f()
        flat[i] = old - step
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * step)
    return out


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Normwise relative error; 0 when both are (near) zero."""
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if den < 1e-12:
        return float(num)
    return float(num / den)


def check_store(loss_fn: Callable[[ParamStore], Tensor], store: ParamStore,
                step: float = 1e-5) -> dict[str, float]:
    """Compare backprop gradients of ``loss_fn(store)`` with central differences.

    Returns the relative error for every parameter.
    """
    store.zero_grad()
    with Tape() as tape:
        loss = loss_fn(store)
    tape.backward(loss)
    analytic = {k: g.copy() for k, g in store.grads.items()}
    store.zero_grad()

    def f():
        return float(loss_fn(store).value)

    return {k: rel_error(analytic[k], numeric_grad(f, store.params[k], step)) for k in store.params}
