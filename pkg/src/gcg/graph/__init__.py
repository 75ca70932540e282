"""The generalized computation graph: model, labels, bootstrap and losses."""

from gcg.graph.bootstrap import compute_bootstrap, fill_bootstrap, sequence_scores
from gcg.graph.config import GraphConfig, j_weights
from gcg.graph.labels import EpisodeSlice, Labels, make_labels
from gcg.graph.losses import enforce_monotonic, loss, value_target
from gcg.graph.network import GraphModel, ModelOutputs, NavNetwork, NetworkDims, predict

__all__ = [
    "EpisodeSlice",
    "GraphConfig",
    "GraphModel",
    "Labels",
    "ModelOutputs",
    "NavNetwork",
    "NetworkDims",
    "compute_bootstrap",
    "enforce_monotonic",
    "fill_bootstrap",
    "j_weights",
    "loss",
    "make_labels",
    "predict",
    "sequence_scores",
    "value_target",
]
