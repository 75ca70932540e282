"""Replay, target rules and the training loop (``gcg.driver.run``, imported on demand)."""

from gcg.driver.replay import Batch, Experience, ReplayBuffer, sample_minibatch
from gcg.driver.targets import NStepConfig, double_q_target, nstep_weighted_return, sync_target

__all__ = [
    "Batch", "Experience", "ReplayBuffer", "sample_minibatch",
    "NStepConfig", "double_q_target", "nstep_weighted_return", "sync_target",
]
