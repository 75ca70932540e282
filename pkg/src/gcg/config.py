"""Run configuration tree with strict (unknown-key-rejecting) YAML serialization."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from gcg.autodiff.optim import AdamConfig
from gcg.driver.targets import NStepConfig
from gcg.errors import ConfigError, ParseError
from gcg.graph.config import GraphConfig
from gcg.graph.network import NetworkDims
from gcg.policy import PolicyConfig
from gcg.sim.car import SimConfig
from gcg.sim.world import resolve_fixture

SIM_MODES = ("episodic", "continuous")
TARGET_RULES = ("max", "double_q")


@dataclass
class NetworkConfig:
    n_frames: int = 4
    conv_filters: tuple[int, ...] = (16, 16)
    conv_kernel: int = 5
    conv_stride: int = 2
    hidden: int = 64
    action_embed: int = 16
    rnn_width: int = 64

    def dims(self, sim: SimConfig) -> NetworkDims:
        return NetworkDims(
            frame_shape=sim.frame_shape,
            n_frames=self.n_frames,
            conv_filters=tuple(self.conv_filters),
            conv_kernel=self.conv_kernel,
            conv_stride=self.conv_stride,
            hidden=self.hidden,
            action_embed=self.action_embed,
            rnn_width=self.rnn_width,
            action_scale=1.0 / sim.max_steer,
        )


@dataclass
class TrainConfig:
    batch_size: int = 32
    grad_steps: int = 1  # gradient steps per environment step
    learning_starts: int = 1000
    replay: str = "uniform"
    target_rule: str = "max"
    checkpoint_interval: int = 10000
    async_mode: bool = False
    snapshot_period: int = 100  # gradient steps between parameter snapshots sent to the actor

    def __post_init__(self):
        if self.batch_size < 1 or self.grad_steps < 0 or self.learning_starts < 0:
            raise ConfigError("batch_size >= 1, grad_steps >= 0 and learning_starts >= 0 required")
        if self.replay not in ("uniform", "prioritized"):
            raise ConfigError(f"replay must be 'uniform' or 'prioritized', got {self.replay!r}")
        if self.target_rule not in TARGET_RULES:
            raise ConfigError(f"target_rule must be one of {TARGET_RULES}, got {self.target_rule!r}")
        if self.checkpoint_interval < 1 or self.snapshot_period < 1:
            raise ConfigError("checkpoint_interval and snapshot_period must be >= 1")


@dataclass
class RunConfig:
    name: str = "custom"
    world: str = "cluttered_mini"
    sim_mode: str = "continuous"
    sim: SimConfig = field(default_factory=lambda: SimConfig(obs_mode="rays"))
    network: NetworkConfig = field(default_factory=NetworkConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    nstep: NStepConfig | None = None
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(lr=1e-3))
    train: TrainConfig = field(default_factory=TrainConfig)
    buffer_capacity: int = 100_000
    steps: int = 50_000
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    eval_interval: int = 1000
    out_dir: str = "runs"
    dtype: str = "float32"
    log_wall_clock: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.sim_mode not in SIM_MODES:
            raise ConfigError(f"sim_mode must be one of {SIM_MODES}, got {self.sim_mode!r}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.steps < 1 or self.eval_interval < 1 or self.buffer_capacity < 1:
            raise ConfigError("steps, eval_interval and buffer_capacity must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if not Path(self.world).exists() and resolve_fixture(self.world) is None:
            raise ConfigError(f"world {self.world!r} is neither a file nor a shipped fixture")
        g = self.graph
        if self.nstep is not None:
            if self.nstep.N != g.label_horizon:
                raise ConfigError(f"nstep.N ({self.nstep.N}) must equal graph.label_horizon ({g.label_horizon})")
            if g.output_mode != "value" or not g.bootstrap:
                raise ConfigError("N-step returns need value outputs with bootstrapping")
        if self.train.target_rule == "double_q" and not (g.output_mode == "value" and g.bootstrap):
            raise ConfigError("double_q targets need value outputs with bootstrapping")
        if abs(self.policy.action_bound - self.sim.max_steer) > 1e-12:
            raise ConfigError("policy.action_bound must equal sim.max_steer")

    def dims(self) -> NetworkDims:
        return self.network.dims(self.sim)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


def to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(f"{path}: null not allowed")
        inner = [a for a in args if a is not type(None)]
        return _build(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp) if f.init}
        unknown = sorted(set(value) - names)
        if unknown:
            raise ConfigError(f"{path}: unknown key {unknown[0]!r}")
        kwargs = {k: _build(hints[k], v, f"{path}.{k}" if path else k) for k, v in value.items()}
        try:
            return tp(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"{path or 'config'}: {exc}") from None
    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        elem = args[0] if args else typing.Any
        items = [_build(elem, v, f"{path}[{i}]") for i, v in enumerate(value)]
        return tuple(items) if origin is tuple else items
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def from_dict(data: dict, cls=RunConfig):
    return _build(cls, data, "")


def dump_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def load_yaml(text: str, path: str | None = None) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], mark.line + 1 if mark else None, path) from None
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    return from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dump_yaml(cfg))


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    return load_yaml(p.read_text(), str(p))
