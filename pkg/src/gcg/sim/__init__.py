"""Deterministic 2D car simulator with raycast observations."""

from gcg.sim.car import SimConfig, SimState, Simulator, StepResult, clearance, render, reset, spawn_state, step
from gcg.sim.world import World, fixture_names, load_world, parse_world

__all__ = [
    "SimConfig",
    "SimState",
    "Simulator",
    "StepResult",
    "World",
    "clearance",
    "fixture_names",
    "load_world",
    "parse_world",
    "render",
    "reset",
    "spawn_state",
    "step",
]
