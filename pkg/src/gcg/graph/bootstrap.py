"""Terminal labels computed by planning with the (target) model at s_{t+H}."""

from __future__ import annotations

import numpy as np

from gcg.graph.config import GraphConfig, j_weights
from gcg.graph.labels import Labels


def sequence_scores(outputs_y: np.ndarray, outputs_b: np.ndarray, config: GraphConfig) -> np.ndarray:
    """J for every row of model outputs: y (..., H), b (...)."""
    w, wb = j_weights(config)
    return outputs_y @ w + wb * outputs_b


def compute_bootstrap(target_model, next_obs, config: GraphConfig, candidates: np.ndarray):
    """Bootstrap label for each observation in ``next_obs`` (B, *obs_shape).

    value: max over candidate sequences of J.
    collision: min over candidates of the mean predicted collision probability.
    Returns None when bootstrapping is disabled.
    """
    if not config.bootstrap:
        return None
    next_obs = np.asarray(next_obs)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    B, K = next_obs.shape[0], candidates.shape[0]
    out = target_model.predict(next_obs, candidates, pairs=True)
    y = np.asarray(out.y_hat, dtype=np.float64).reshape(B, K, -1)
    b = np.asarray(out.b_hat, dtype=np.float64).reshape(B, K)
    if config.output_mode == "value":
        return sequence_scores(y, b, config).max(axis=1)
    return y.mean(axis=2).min(axis=1)


def fill_bootstrap(labels: Labels, values) -> Labels:
    """Write bootstrap values into the windows that need them."""
    if values is None:
        return labels
    labels.b = np.where(labels.needs_bootstrap, values, labels.b)
    return labels
