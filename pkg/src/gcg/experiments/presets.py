"""Named run configurations: the chosen method, the Q-learning baselines and the design grid."""

from __future__ import annotations

from typing import Callable

from gcg.config import RunConfig, TrainConfig
from gcg.driver.targets import NStepConfig
from gcg.errors import ConfigError
from gcg.graph.config import GraphConfig


def _run(name: str, graph: GraphConfig, **kw) -> RunConfig:
    return RunConfig(name=name, graph=graph, **kw)


def gcg() -> RunConfig:
    """Collision probabilities, cross entropy, H = N = 16, no bootstrap."""
    return _run("gcg", GraphConfig(output_mode="collision", loss_mode="cross_entropy", horizon=16,
                                   label_horizon=16, bootstrap=False))


def _dql(name: str, N: int) -> RunConfig:
    graph = GraphConfig(output_mode="value", loss_mode="mse", horizon=1, label_horizon=N, bootstrap=True)
    nstep = NStepConfig.one_hot(N) if N > 1 else None
    return _run(name, graph, nstep=nstep, train=TrainConfig(target_rule="double_q"))


def dql() -> RunConfig:
    """Double Q-learning: value outputs, H = N = 1, bootstrap, target network."""
    return _dql("dql", 1)


def nstep_dql_5() -> RunConfig:
    return _dql("nstep-dql-5", 5)


def nstep_dql_10() -> RunConfig:
    return _dql("nstep-dql-10", 10)


def _maql(name: str, H: int) -> RunConfig:
    graph = GraphConfig(output_mode="value", loss_mode="mse", horizon=H, label_horizon=H, bootstrap=True)
    return _run(name, graph)


def maql() -> RunConfig:
    """Multi-action Q-learning: value outputs over H = 5 actions with a bootstrapped value-to-go."""
    return _maql("maql", 5)


def value_regression() -> RunConfig:
    return _run("value-regression", GraphConfig(output_mode="value", loss_mode="mse", horizon=16,
                                                label_horizon=16, bootstrap=False))


def collision_mse() -> RunConfig:
    return _run("collision-mse", GraphConfig(output_mode="collision", loss_mode="mse", horizon=16,
                                             label_horizon=16, bootstrap=False))


def collision_monotonic() -> RunConfig:
    return _run("collision-monotonic", GraphConfig(output_mode="collision", loss_mode="cross_entropy",
                                                   horizon=16, label_horizon=16, bootstrap=False,
                                                   monotonic_outputs=True))


def collision_bootstrap() -> RunConfig:
    return _run("collision-bootstrap", GraphConfig(output_mode="collision", loss_mode="cross_entropy",
                                                   horizon=16, label_horizon=16, bootstrap=True))


# design grid rows: A-C value outputs, D-G collision outputs
GRID_ROWS: dict[str, dict] = {
    "A": dict(output_mode="value", loss_mode="mse", horizon=5, bootstrap=True),
    "B": dict(output_mode="value", loss_mode="mse", horizon=16, bootstrap=True),
    "C": dict(output_mode="value", loss_mode="mse", horizon=16, bootstrap=False),
    "D": dict(output_mode="collision", loss_mode="mse", horizon=16, bootstrap=False),
    "E": dict(output_mode="collision", loss_mode="mse", horizon=16, bootstrap=False, monotonic_outputs=True),
    "F": dict(output_mode="collision", loss_mode="cross_entropy", horizon=16, bootstrap=False),
    "G": dict(output_mode="collision", loss_mode="cross_entropy", horizon=16, bootstrap=False,
              monotonic_outputs=True),
}
# columns: (replay, label extension)
GRID_COLS = {0: ("uniform", "clip"), 1: ("uniform", "extend"), 2: ("prioritized", "clip"),
             3: ("prioritized", "extend")}


def grid(row: str, col: int) -> RunConfig:
    if row not in GRID_ROWS or col not in GRID_COLS:
        raise ConfigError(f"grid cell must be one of rows {sorted(GRID_ROWS)} x columns {sorted(GRID_COLS)}")
    cell = dict(GRID_ROWS[row])
    replay, extension = GRID_COLS[col]
    graph = GraphConfig(label_horizon=cell["horizon"], label_extension=extension, **cell)
    return _run(f"grid-{row}{col}", graph, train=TrainConfig(replay=replay))


PRESETS: dict[str, Callable[[], RunConfig]] = {
    "gcg": gcg,
    "dql": dql,
    "nstep-dql-5": nstep_dql_5,
    "nstep-dql-10": nstep_dql_10,
    "maql": maql,
    "value-regression": value_regression,
    "collision-mse": collision_mse,
    "collision-monotonic": collision_monotonic,
    "collision-bootstrap": collision_bootstrap,
}
for _r in GRID_ROWS:
    for _c in GRID_COLS:
        PRESETS[f"grid-{_r}{_c}"] = (lambda r=_r, c=_c: grid(r, c))


def preset_names() -> list[str]:
    return list(PRESETS)


def preset(name: str) -> RunConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    return factory()
