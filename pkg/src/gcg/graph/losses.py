"""Loss instantiations: Bellman error on J, collision cross-entropy, collision MSE."""

from __future__ import annotations

import numpy as np

from gcg.autodiff import ops
from gcg.autodiff.tape import Tensor
from gcg.errors import TrainingError, UsageError
from gcg.graph.config import GraphConfig, j_weights
from gcg.graph.labels import Labels
from gcg.graph.network import ModelOutputs


def value_target(labels: Labels, config: GraphConfig) -> np.ndarray:
    """Discounted label sum over N steps plus gamma^N times the bootstrap."""
    if labels.target is not None:
        return np.asarray(labels.target, dtype=np.float64)
    N = config.label_horizon
    disc = config.gamma ** np.arange(N)
    ret = (labels.y[:, :N] * labels.mask[:, :N] * disc).sum(axis=1)
    if config.bootstrap:
        if np.any(labels.needs_bootstrap & np.isnan(labels.b)):
            raise UsageError("bootstrap labels missing; run compute_bootstrap first")
        ret = ret + config.gamma ** N * labels.b * labels.b_weight
    return ret


def enforce_monotonic(raw_step_logits) -> Tensor:
    """Nondecreasing collision probabilities 1 - prod_{i<=h}(1 - sigmoid(z_i))."""
    z = raw_step_logits if isinstance(raw_step_logits, Tensor) else Tensor(np.atleast_2d(raw_step_logits))
    return ops.survival_probs(z)


def loss(outputs: ModelOutputs, labels: Labels, config: GraphConfig) -> Tensor:
    """Batch-mean training loss for one instantiation; a scalar tensor."""
    y_hat, b_hat = outputs.y_hat, outputs.b_hat
    B, H = y_hat.shape
    dtype = y_hat.value.dtype if isinstance(y_hat, Tensor) else np.float64
    mask = labels.mask[:, :H]
    if config.output_mode == "value":
        w, wb = j_weights(config)
        J = ops.sum(ops.mul(y_hat, (mask * w).astype(dtype)), axis=1)
        if config.bootstrap:
            J = ops.add(J, ops.mul(b_hat, (wb * labels.b_weight).astype(dtype)))
        out = ops.mse(J, value_target(labels, config), np.full(B, 1.0 / B))
    else:
        y = labels.y[:, :H]
        head = ops.bce if config.loss_mode == "cross_entropy" else ops.mse
        out = head(y_hat, y, mask / B)
        if config.bootstrap:
            if np.any(labels.needs_bootstrap & np.isnan(labels.b)):
                raise UsageError("bootstrap labels missing; run compute_bootstrap first")
            out = ops.add(out, head(b_hat, np.nan_to_num(labels.b), labels.b_weight / B))
    if not np.isfinite(out.value):
        raise TrainingError(f"non-finite loss {out.value}")
    return out
