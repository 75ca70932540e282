"""Presets, evaluation, sweeps, plots and the command line."""

from gcg.experiments.presets import PRESETS, preset, preset_names

__all__ = ["PRESETS", "preset", "preset_names"]
