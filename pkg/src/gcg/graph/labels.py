"""Training labels from replay windows, including episode-end clipping/extension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gcg.errors import UsageError
from gcg.graph.config import GraphConfig


@dataclass
class EpisodeSlice:
    """A batch of replay windows of length L = config.window.

    ``length[i]`` is the number of recorded steps in window i; a window is
    shorter than L only when its episode ended inside it (``ended[i]``).
    """

    actions: np.ndarray  # (B, L)
    rewards: np.ndarray  # (B, L)
    collisions: np.ndarray  # (B, L) bool
    length: np.ndarray  # (B,) int
    ended: np.ndarray  # (B,) bool

    @classmethod
    def single(cls, actions, rewards, collisions, ended: bool, window: int) -> "EpisodeSlice":
        """One window from per-step lists, zero-padded to ``window`` steps."""
        n = len(actions)
        if n == 0:
            raise UsageError("empty episode slice")
        if n > window:
            raise UsageError(f"slice of {n} steps exceeds window {window}")
        pad = lambda v, dt: np.pad(np.asarray(v, dtype=dt), (0, window - n))[None]
        return cls(pad(actions, np.float64), pad(rewards, np.float64), pad(collisions, bool),
                   np.array([n]), np.array([bool(ended)]))

    def __len__(self):
        return self.actions.shape[0]


@dataclass
class Labels:
    y: np.ndarray  # (B, L) per-step labels
    mask: np.ndarray  # (B, L) 1 where a step contributes to the loss
    b: np.ndarray  # (B,) terminal label; filled by bootstrap for open windows
    b_weight: np.ndarray  # (B,) 1 where the terminal term is used
    needs_bootstrap: np.ndarray  # (B,) bool: b must come from the model at s_{t+L}
    extended: np.ndarray  # (B,) bool
    actions: np.ndarray  # (B, H) actions to feed the model
    target: np.ndarray | None = None  # (B,) value-mode regression target override


def make_labels(sl: EpisodeSlice, config: GraphConfig, rng: np.random.Generator | None = None,
                action_bound: float = np.radians(30.0)) -> Labels:
    """Build labels for a batch of windows.

    collision mode: y_h = 1 iff a collision happened at any step in [t, t+h].
    value mode: y_h = reward at t+h.
    Windows cut short by an episode end are masked (clip) or padded with
    random actions and 0 rewards / the last collision label (extend).
    """
    B, L = sl.actions.shape
    if B == 0:
        raise UsageError("empty episode slice")
    if L != config.window:
        raise UsageError(f"slice window {L} != config window {config.window}")
    n = np.asarray(sl.length)
    if np.any(n < 1) or np.any(n > L):
        raise UsageError("slice lengths must lie in [1, window]")
    valid = np.arange(L)[None, :] < n[:, None]
    short = n < L
    if np.any(short & ~np.asarray(sl.ended)):
        raise UsageError("a window shorter than the horizon must end its episode")

    if config.output_mode == "collision":
        y = np.maximum.accumulate(np.where(valid, sl.collisions, False), axis=1).astype(np.float64)
        last = y[np.arange(B), n - 1]
        y = np.where(valid, y, last[:, None])
        b_end = last
    else:
        y = np.where(valid, sl.rewards, 0.0).astype(np.float64)
        b_end = np.zeros(B)

    extend = config.label_extension == "extend"
    mask = np.ones((B, L)) if extend else valid.astype(np.float64)

    H = config.horizon
    actions = np.where(valid, sl.actions, 0.0)[:, :H].astype(np.float64)
    if extend and np.any(short):
        rng = rng or np.random.default_rng(0)
        fill = rng.uniform(-action_bound, action_bound, size=(B, H))
        actions = np.where(valid[:, :H], actions, fill)

    ended = np.asarray(sl.ended, dtype=bool)
    needs = np.full(B, config.bootstrap) & ~ended
    # open windows get NaN until compute_bootstrap fills them
    b = np.where(ended, b_end, np.nan if config.bootstrap else 0.0)
    if config.bootstrap:
        b_weight = np.where(ended & ~extend & short, 0.0, 1.0)
    else:
        b_weight = np.zeros(B)
    return Labels(y, mask, b, b_weight, needs, short & extend, actions)
