"""Baseline target rules (weighted N-step returns, double Q) and target-network sync."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gcg.errors import ConfigError
from gcg.graph.bootstrap import sequence_scores
from gcg.graph.config import GraphConfig


@dataclass
class NStepConfig:
    """Weights w_1..w_N over the 1..N-step returns; must lie on the simplex."""

    N: int = 1
    weights: list[float] = field(default_factory=lambda: [1.0])

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if self.N < 1 or w.shape != (self.N,):
            raise ConfigError(f"need exactly N={self.N} weights, got {len(self.weights)}")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-9):
            raise ConfigError(f"N-step weights must be nonnegative and sum to 1, got {self.weights}")

    @classmethod
    def one_hot(cls, N: int) -> "NStepConfig":
        return cls(N, [0.0] * (N - 1) + [1.0])

    @property
    def is_one_hot_last(self) -> bool:
        return self.weights[-1] == 1.0


def nstep_weighted_return(rewards, bootstrap_values, gamma: float, nstep: NStepConfig) -> float:
    """sum_{N'} w_{N'} (sum_{n<N'} gamma^n r_{t+n} + gamma^{N'} V_{t+N'}).

    ``bootstrap_values`` is either V_{t+N} (allowed only when all the weight
    sits on N) or the sequence V_{t+1}..V_{t+N}.
    """
    nstep.validate()
    r = np.asarray(rewards, dtype=np.float64)
    N = nstep.N
    if r.shape[0] < N:
        raise ConfigError(f"need at least {N} rewards, got {r.shape[0]}")
    w = np.asarray(nstep.weights, dtype=np.float64)
    V = np.asarray(bootstrap_values, dtype=np.float64)
    if V.ndim == 0:
        if np.any(w[:-1] != 0):
            raise ConfigError("a single bootstrap value only supports weight on the N-step return")
        V = np.concatenate([np.zeros(N - 1), [float(V)]])
    if V.shape != (N,):
        raise ConfigError(f"need {N} bootstrap values, got shape {V.shape}")
    disc = gamma ** np.arange(N)
    partial = np.cumsum(disc * r[:N])  # partial[k] = sum_{n<=k} gamma^n r_n
    returns = partial + gamma ** np.arange(1, N + 1) * V
    return float(w @ returns)


def double_q_target(online_model, target_model, next_obs, candidates, graph: GraphConfig) -> np.ndarray:
    """J_target(s', a*) with a* = argmax_a J_online(s', a) over the candidate set.

    ``next_obs`` is (B, *obs_shape); returns (B,).
    """
    next_obs = np.asarray(next_obs)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    B, K = next_obs.shape[0], candidates.shape[0]
    on = online_model.predict(next_obs, candidates, pairs=True)
    J_on = sequence_scores(np.asarray(on.y_hat, np.float64).reshape(B, K, -1),
                           np.asarray(on.b_hat, np.float64).reshape(B, K), graph)
    best = np.argmax(J_on, axis=1)
    tg = target_model.predict(next_obs, candidates, pairs=True)
    J_tg = sequence_scores(np.asarray(tg.y_hat, np.float64).reshape(B, K, -1),
                           np.asarray(tg.b_hat, np.float64).reshape(B, K), graph)
    return J_tg[np.arange(B), best]


def sync_target(online, target, mode: str = "hard", tau: float = 1.0):
    """Hard copy or Polyak update of ``target`` (a ParamStore) from ``online``; returns target."""
    if mode == "hard":
        target.load_values(online)
    elif mode == "soft":
        if not 0.0 <= tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        target.polyak(online, tau)
    else:
        raise ConfigError(f"sync mode must be 'hard' or 'soft', got {mode!r}")
    return target
