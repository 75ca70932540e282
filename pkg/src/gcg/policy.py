"""Policy extraction: J, action-sequence sampling, random shooting, CEM and exploration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from gcg.errors import ConfigError
from gcg.graph.bootstrap import sequence_scores
from gcg.graph.config import GraphConfig
from gcg.graph.network import ModelOutputs

SAMPLERS = ("hold-constant", "iid-uniform", "cem")
STD_FLOOR = 1e-3


@dataclass
class PolicyConfig:
    K: int = 128
    sampler: str = "hold-constant"
    cem_iterations: int = 3
    cem_elite_frac: float = 0.1
    cem_init_std: float = 0.3
    eps_start: float = 0.05
    eps_end: float = 0.0
    eps_decay_steps: int = 20000
    noise_start: float = 0.1  # radians; the car turns ~1 rad per step at full lock
    noise_end: float = 0.02
    noise_decay_steps: int = 20000
    action_bound: float = math.radians(30.0)
    bootstrap_K: int = 16  # candidate sequences per next-state when computing bootstraps

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.K < 1 or self.bootstrap_K < 1:
            raise ConfigError("K and bootstrap_K must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if not 0.0 < self.cem_elite_frac <= 1.0:
            raise ConfigError("cem_elite_frac must lie in (0, 1]")
        if self.cem_iterations < 1:
            raise ConfigError("cem_iterations must be >= 1")
        if self.eps_start < self.eps_end or self.noise_start < self.noise_end:
            raise ConfigError("exploration schedules must be nonincreasing")
        if not (0.0 <= self.eps_end <= self.eps_start <= 1.0):
            raise ConfigError("epsilon values must lie in [0, 1]")
        if self.noise_end < 0 or self.action_bound <= 0:
            raise ConfigError("noise must be >= 0 and action_bound > 0")


def evaluate_J(outputs: ModelOutputs, config: GraphConfig):
    """Policy evaluation function for each row of outputs (scalar for a single row)."""
    y = np.asarray(outputs.y_hat, dtype=np.float64)
    b = np.asarray(outputs.b_hat, dtype=np.float64)
    J = sequence_scores(y, b, config)
    return float(J) if np.ndim(J) == 0 else J


def sample_sequences(K: int, H: int, sampler: str, bound: float, rng: np.random.Generator) -> np.ndarray:
    """K candidate steering sequences of length H, uniform within +-bound."""
    if sampler == "iid-uniform":
        return rng.uniform(-bound, bound, size=(K, H))
    first = rng.uniform(-bound, bound, size=(K, 1))
    return np.repeat(first, H, axis=1)


def enumerate_sequences(values, H: int) -> np.ndarray:
    """Every length-H sequence over a discrete action set, lexicographic order."""
    return np.array(list(itertools.product(list(values), repeat=H)), dtype=np.float64).reshape(-1, H)


def _scores(model, observation, candidates, graph: GraphConfig) -> np.ndarray:
    obs = np.asarray(observation)
    if obs.ndim == len(model.network.dims.obs_shape):
        obs = obs[None]
    return np.atleast_1d(evaluate_J(model.predict(obs, candidates), graph))


def select_action_shooting(model, observation, planner: PolicyConfig, graph: GraphConfig,
                           rng: np.random.Generator, candidates=None) -> tuple[np.ndarray, float]:
    """Random shooting: score K sampled sequences in one batch, keep the best.

    Ties go to the lowest sample index.
    """
    if candidates is None:
        sampler = "hold-constant" if planner.sampler == "cem" else planner.sampler
        candidates = sample_sequences(planner.K, graph.horizon, sampler, planner.action_bound, rng)
    candidates = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    J = _scores(model, observation, candidates, graph)
    i = int(np.argmax(J))
    return candidates[i].copy(), float(J[i])


@dataclass
class CEMResult:
    sequence: np.ndarray
    J: float
    first_best: float
    means: list
    stds: list


def cem_optimize(score_fn, H: int, planner: PolicyConfig, rng: np.random.Generator,
                 mean=None) -> CEMResult:
    """Cross-entropy method over steering sequences with a diagonal Gaussian.

    Returns the best sequence seen across all iterations, so the result is
    never worse than the iteration-0 best.
    """
    bound = planner.action_bound
    mu = np.zeros(H) if mean is None else np.asarray(mean, dtype=np.float64)
    sd = np.full(H, max(planner.cem_init_std, STD_FLOOR))
    n_elite = max(1, int(math.ceil(planner.cem_elite_frac * planner.K)))
    best_seq, best_J, first_best = None, -np.inf, None
    means, stds = [mu.copy()], [sd.copy()]
    for it in range(planner.cem_iterations):
        samples = np.clip(mu + sd * rng.standard_normal((planner.K, H)), -bound, bound)
        J = np.asarray(score_fn(samples), dtype=np.float64)
        i = int(np.argmax(J))
        if J[i] > best_J:
            best_J, best_seq = float(J[i]), samples[i].copy()
        if it == 0:
            first_best = float(J[i])
        elite = samples[np.argsort(-J, kind="stable")[:n_elite]]
        mu = elite.mean(axis=0)
        sd = np.maximum(elite.std(axis=0), STD_FLOOR)
        means.append(mu.copy())
        stds.append(sd.copy())
    return CEMResult(best_seq, best_J, first_best, means, stds)


def select_action_cem(model, observation, planner: PolicyConfig, graph: GraphConfig,
                      rng: np.random.Generator) -> tuple[np.ndarray, float]:
    res = cem_optimize(lambda c: _scores(model, observation, c, graph), graph.horizon, planner, rng)
    return res.sequence, res.J


def select_action(model, observation, planner: PolicyConfig, graph: GraphConfig, rng) -> tuple[np.ndarray, float]:
    if planner.sampler == "cem":
        return select_action_cem(model, observation, planner, graph, rng)
    return select_action_shooting(model, observation, planner, graph, rng)


@dataclass
class ScheduleState:
    eps: float
    noise: float


def _linear(start, end, steps, t):
    if steps <= 0:
        return end
    frac = min(max(t / steps, 0.0), 1.0)
    return start + frac * (end - start)


def schedule_at(planner: PolicyConfig, step: int) -> ScheduleState:
    """Linearly decayed epsilon and steering-noise stddev at environment step ``step``."""
    return ScheduleState(
        _linear(planner.eps_start, planner.eps_end, planner.eps_decay_steps, step),
        _linear(planner.noise_start, planner.noise_end, planner.noise_decay_steps, step),
    )


def explore(action_sequence, schedule: ScheduleState, rng: np.random.Generator,
            bound: float = math.radians(30.0)) -> np.ndarray:
    """Perturb the first action: epsilon-uniform replacement, then clipped Gaussian noise."""
    seq = np.array(action_sequence, dtype=np.float64, copy=True)
    if schedule.eps > 0 and rng.random() < schedule.eps:
        seq[0] = rng.uniform(-bound, bound)
    if schedule.noise > 0:
        seq[0] = np.clip(seq[0] + schedule.noise * rng.standard_normal(), -bound, bound)
    return seq
