"""Greedy-policy evaluation of checkpoints and distance statistics."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gcg.autodiff.params import load_checkpoint
from gcg.config import RunConfig, load_config
from gcg.driver.run import build_model, greedy_policy, random_policy, rollout, rollout_continuous
from gcg.errors import ConfigError
from gcg.graph.network import GraphModel
from gcg.sim.world import World, load_world


@dataclass
class EvalStats:
    distances: list[float]
    mean: float
    median: float
    max: float
    episodes: int

    @classmethod
    def from_distances(cls, distances) -> "EvalStats":
        d = [float(x) for x in distances]
        if not d:
            return cls([], 0.0, 0.0, 0.0, 0)
        a = np.asarray(d)
        return cls(d, float(a.mean()), float(np.median(a)), float(a.max()), len(d))

    def as_dict(self) -> dict:
        return {"episodes": self.episodes, "mean": self.mean, "median": self.median, "max": self.max}


def _config_for(ckpt: Path, config: RunConfig | str | None) -> RunConfig:
    if isinstance(config, RunConfig):
        return config
    path = Path(config) if config is not None else ckpt.parent / "config.yaml"
    if not path.exists():
        raise ConfigError(f"no run config found for checkpoint {ckpt} (looked for {path})")
    return load_config(path)


def load_model(checkpoint, config: RunConfig | str | None = None) -> tuple[GraphModel, RunConfig]:
    """Rebuild the model described by ``config`` and fill it from ``checkpoint``.

    A checkpoint whose parameter names or shapes disagree with the config
    (different horizon-independent sizes, observation shape, cell type) is a
    config error.
    """
    ckpt = Path(checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint {ckpt} not found")
    cfg = _config_for(ckpt, config)
    sidecar = ckpt.parent / "config.yaml"
    if config is not None and sidecar.exists():
        trained = load_config(sidecar)
        if trained.graph.horizon != cfg.graph.horizon:
            raise ConfigError(f"checkpoint was trained with horizon {trained.graph.horizon}, "
                              f"config asks for {cfg.graph.horizon}")
        if tuple(trained.sim.frame_shape) != tuple(cfg.sim.frame_shape):
            raise ConfigError(f"checkpoint was trained on observations {trained.sim.frame_shape}, "
                              f"config provides {cfg.sim.frame_shape}")
    model = build_model(cfg, 0)
    stored = load_checkpoint(ckpt, dtype=cfg.np_dtype)
    try:
        model.params.load_values(stored)
    except ConfigError as exc:
        raise ConfigError(f"checkpoint {ckpt} does not match config {cfg.name!r}: {exc}") from None
    return model, cfg


def evaluate(checkpoint, world=None, episodes: int = 10, seed: int = 0, config=None,
             max_steps: int | None = None) -> EvalStats:
    """Distance until crash of the greedy policy over ``episodes`` episodes."""
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    model, cfg = load_model(checkpoint, config)
    w = _world(world if world is not None else cfg.world)
    _check_obs(cfg)
    return EvalStats.from_distances(rollout(greedy_policy(model, cfg), cfg, w, episodes, seed, max_steps))


def evaluate_random(cfg: RunConfig, world=None, episodes: int = 100, seed: int = 0,
                    max_steps: int | None = None) -> EvalStats:
    w = _world(world if world is not None else cfg.world)
    return EvalStats.from_distances(rollout(random_policy(cfg), cfg, w, episodes, seed, max_steps))


def random_baseline(cfg: RunConfig, steps: int = 20000, seed: int = 0, world=None) -> EvalStats:
    """Uniform random steering under the training protocol (continuous resets).

    This is the denominator for learning-curve comparisons, which are measured
    on the same kind of episodes.
    """
    w = _world(world if world is not None else cfg.world)
    return EvalStats.from_distances(rollout_continuous(random_policy(cfg), cfg, w, steps, seed))


def _world(world) -> World:
    return world if isinstance(world, World) else load_world(world)


def _check_obs(cfg: RunConfig) -> None:
    dims = cfg.dims()
    if tuple(dims.frame_shape) != tuple(cfg.sim.frame_shape):
        raise ConfigError(f"model frame shape {dims.frame_shape} != simulator frame shape {cfg.sim.frame_shape}")


def final_distance(episodes, total_steps: int, frac: float = 0.1, open_episode=None) -> float:
    """Mean distance of the episodes that end in the last ``frac`` of the step budget.

    The episode still running at the end of the budget counts too, so a
    policy that never crashes late in training is not scored as zero.
    """
    cutoff = total_steps * (1.0 - frac)
    d = [e.distance for e in episodes if e.end_step > cutoff]
    if open_episode is not None and open_episode.distance > 0:
        d.append(open_episode.distance)
    return float(np.mean(d)) if d else 0.0
