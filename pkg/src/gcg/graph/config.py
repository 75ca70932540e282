from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gcg.errors import ConfigError

OUTPUT_MODES = ("value", "collision")
LOSS_MODES = ("mse", "cross_entropy")
EXTENSIONS = ("extend", "clip")
CELLS = ("mi_lstm", "lstm")


@dataclass
class GraphConfig:
    """Switch-board selecting one instantiation of the computation graph.

    ``target_sync`` is a hard-copy period in gradient steps; ``target_tau``,
    when set, replaces it with a Polyak soft update every step.
    """

    output_mode: str = "collision"
    loss_mode: str = "cross_entropy"
    horizon: int = 16
    label_horizon: int = 16
    gamma: float = 0.99
    bootstrap: bool = False
    target_sync: int = 1000
    target_tau: float | None = None
    monotonic_outputs: bool = False
    label_extension: str = "extend"
    recurrent_cell: str = "mi_lstm"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.output_mode not in OUTPUT_MODES:
            raise ConfigError(f"output_mode must be one of {OUTPUT_MODES}, got {self.output_mode!r}")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.label_extension not in EXTENSIONS:
            raise ConfigError(f"label_extension must be one of {EXTENSIONS}, got {self.label_extension!r}")
        if self.recurrent_cell not in CELLS:
            raise ConfigError(f"recurrent_cell must be one of {CELLS}, got {self.recurrent_cell!r}")
        if self.horizon < 1 or self.label_horizon < 1:
            raise ConfigError("horizons must be >= 1")
        if self.label_horizon != self.horizon:
            nstep_path = self.horizon == 1 and self.label_horizon > 1 and self.output_mode == "value"
            if not nstep_path:
                raise ConfigError(
                    f"label_horizon ({self.label_horizon}) must equal horizon ({self.horizon}) "
                    "except for value-mode N-step baselines with horizon 1"
                )
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.loss_mode == "cross_entropy" and self.output_mode != "collision":
            raise ConfigError("cross_entropy loss requires output_mode 'collision'")
        if self.monotonic_outputs and self.output_mode != "collision":
            raise ConfigError("monotonic_outputs only applies to collision outputs")
        if self.target_sync < 1:
            raise ConfigError("target_sync must be >= 1")
        if self.target_tau is not None and not 0.0 <= self.target_tau <= 1.0:
            raise ConfigError("target_tau must lie in [0, 1]")

    @property
    def window(self) -> int:
        """Replay window length: the longer of the model and label horizons."""
        return max(self.horizon, self.label_horizon)


def j_weights(config: GraphConfig) -> tuple[np.ndarray, float]:
    """Per-step and terminal coefficients of the policy evaluation function.

    value: J = sum_h gamma^h y_h + gamma^H b;  collision: J = -sum_h y_h - b.
    The terminal coefficient is 0 when bootstrapping is off.
    """
    H = config.horizon
    if config.output_mode == "value":
        w = config.gamma ** np.arange(H, dtype=np.float64)
        wb = config.gamma ** H
    else:
        w = -np.ones(H)
        wb = -1.0
    return w, (wb if config.bootstrap else 0.0)
