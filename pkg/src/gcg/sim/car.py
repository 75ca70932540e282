"""Fixed-speed kinematic bicycle car with swept collision checks and episode resets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from gcg.errors import ConfigError
from gcg.sim.render import render_frame, render_rays
from gcg.sim.world import World


@dataclass
class SimConfig:
    speed: float = 2.0  # m/s
    dt: float = 0.25  # s per action
    wheelbase: float = 0.3
    max_steer: float = math.radians(30.0)
    car_radius: float = 0.15
    fov: float = math.radians(120.0)
    d_max: float = 10.0
    width: int = 64
    height: int = 36
    obs_mode: str = "frame"  # frame | rays
    n_rays: int = 32
    episode_cap: float = 1000.0  # meters
    spawn_noise: float = 0.1  # position noise radius, meters
    spawn_heading_noise: float = 0.1  # radians
    backup_distance: float = 1.0
    backup_steer: float = math.radians(15.0)

    def __post_init__(self):
        if self.obs_mode not in ("frame", "rays"):
            raise ConfigError(f"obs_mode must be 'frame' or 'rays', got {self.obs_mode!r}")
        for name in ("speed", "dt", "wheelbase", "max_steer", "car_radius", "fov", "d_max", "episode_cap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.width < 1 or self.height < 1 or self.n_rays < 1:
            raise ConfigError("observation dimensions must be positive")

    @property
    def frame_shape(self) -> tuple[int, ...]:
        return (self.height, self.width) if self.obs_mode == "frame" else (self.n_rays,)

    def lookahead(self, horizon: int) -> float:
        """Distance covered by ``horizon`` actions at the configured speed."""
        return horizon * self.speed * self.dt

    def steps_per_hour(self) -> int:
        return int(round(3600.0 / self.dt))


@dataclass
class SimState:
    x: float
    y: float
    theta: float
    odometer: float = 0.0
    collision: bool = False
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False, compare=False)
    steer_clamps: int = 0


@dataclass
class StepResult:
    frame: np.ndarray
    reward: float
    collision: bool
    done: bool
    info: dict


def clearance(world: World, pts: np.ndarray) -> np.ndarray:
    """Distance from each point (P, 2) to the nearest wall or obstacle surface."""
    px, py = pts[:, 0:1], pts[:, 1:2]
    w = world.walls
    ax, ay, bx, by = w[:, 0], w[:, 1], w[:, 2], w[:, 3]
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(ll > 0, ((px - ax) * ex + (py - ay) * ey) / ll, 0.0)
    u = np.clip(u, 0.0, 1.0)
    d = np.hypot(px - (ax + u * ex), py - (ay + u * ey)).min(axis=1)
    o = world.obstacles
    if len(o):
        d = np.minimum(d, (np.hypot(px - o[:, 0], py - o[:, 1]) - o[:, 2]).min(axis=1))
    return d


def _first_contact(world: World, radius: float, start: np.ndarray, delta: np.ndarray) -> float | None:
    """Smallest path fraction s in (0, 1] at which the car circle touches geometry.

    The chord is sampled densely enough (spacing < radius/2) that a
    zero-thickness wall cannot be crossed between samples.
    """
    length = float(np.hypot(*delta))
    n = max(2, int(math.ceil(length / (radius / 2.0)))) + 1
    s = np.linspace(0.0, 1.0, n)[1:]
    hits = clearance(world, start + s[:, None] * delta) < radius
    if not hits.any():
        return None
    k = int(np.argmax(hits))
    lo = 0.0 if k == 0 else float(s[k - 1])
    hi = float(s[k])
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if clearance(world, (start + mid * delta)[None])[0] < radius:
            hi = mid
        else:
            lo = mid
    return hi


def step(world: World, state: SimState, steering: float, cfg: SimConfig) -> tuple[SimState, StepResult]:
    """Advance one action period at fixed speed.

    On contact the car stops at the first touching point of its path and
    earns no reward or distance for the step.
    """
    clamps = state.steer_clamps
    if abs(steering) > cfg.max_steer:
        steering = math.copysign(cfg.max_steer, steering)
        clamps += 1
    v, dt = cfg.speed, cfg.dt
    delta = np.array([v * math.cos(state.theta) * dt, v * math.sin(state.theta) * dt])
    start = np.array([state.x, state.y])
    theta = state.theta + (v / cfg.wheelbase) * math.tan(steering) * dt
    hit = _first_contact(world, cfg.car_radius, start, delta)
    if hit is None:
        pos = start + delta
        odometer = state.odometer + v * dt
        reward = v
    else:
        pos = start + hit * delta
        odometer = state.odometer
        reward = 0.0
    new = replace(state, x=float(pos[0]), y=float(pos[1]), theta=theta, odometer=odometer,
                  collision=hit is not None, steer_clamps=clamps)
    done = new.collision or new.odometer >= cfg.episode_cap
    return new, StepResult(render(world, new, cfg), reward, new.collision, done, {"odometer": odometer})


def render(world: World, state: SimState, cfg: SimConfig) -> np.ndarray:
    if cfg.obs_mode == "rays":
        return render_rays(world, state.x, state.y, state.theta, cfg.fov, cfg.d_max, cfg.n_rays)
    return render_frame(world, state.x, state.y, state.theta, cfg.fov, cfg.d_max, cfg.width, cfg.height)


def spawn_state(world: World, cfg: SimConfig, rng: np.random.Generator, steer_clamps: int = 0) -> SimState:
    """Spawn pose plus seeded noise, resampled until collision-free."""
    sx, sy, st = world.spawn
    for _ in range(100):
        r = cfg.spawn_noise * math.sqrt(rng.random())
        a = rng.uniform(-math.pi, math.pi)
        x, y = sx + r * math.cos(a), sy + r * math.sin(a)
        theta = st + rng.uniform(-cfg.spawn_heading_noise, cfg.spawn_heading_noise)
        if clearance(world, np.array([[x, y]]))[0] >= cfg.car_radius:
            return SimState(x, y, theta, rng=rng, steer_clamps=steer_clamps)
    return SimState(sx, sy, st, rng=rng, steer_clamps=steer_clamps)


def _reverse(world: World, state: SimState, steer: float, cfg: SimConfig) -> SimState | None:
    """Drive backwards ``backup_distance`` with constant steering; None if that collides."""
    ds = cfg.speed * cfg.dt
    n = max(1, int(math.ceil(cfg.backup_distance / ds)))
    ds = cfg.backup_distance / n
    x, y, theta = state.x, state.y, state.theta
    for _ in range(n):
        delta = np.array([-ds * math.cos(theta), -ds * math.sin(theta)])
        # the stopped car already touches geometry; only count contact that gets closer
        start = np.array([x, y])
        pts = start + np.linspace(0.0, 1.0, 9)[1:, None] * delta
        c0 = clearance(world, start[None])[0]
        c = clearance(world, pts)
        if np.any((c < cfg.car_radius) & (c < c0 - 1e-9)):
            return None
        x, y = x + delta[0], y + delta[1]
        theta = theta - (ds / cfg.wheelbase) * math.tan(steer)
    if clearance(world, np.array([[x, y]]))[0] < cfg.car_radius:
        return None
    return replace(state, x=x, y=y, theta=theta, odometer=0.0, collision=False)


def reset(world: World, cfg: SimConfig, mode: str = "episodic", state: SimState | None = None,
          rng: np.random.Generator | None = None) -> SimState:
    """Start a new episode.

    episodic: spawn pose with seeded noise.
    continuous: keep going from ``state``; after a collision first back up
    ``backup_distance`` meters steering to a random side, mirroring the
    steering if that collides and falling back to the spawn pose last.
    """
    if mode not in ("episodic", "continuous"):
        raise ConfigError(f"reset mode must be 'episodic' or 'continuous', got {mode!r}")
    if rng is None:
        rng = state.rng if state is not None else np.random.default_rng(0)
    clamps = state.steer_clamps if state is not None else 0
    if mode == "episodic" or state is None:
        return spawn_state(world, cfg, rng, clamps)
    if not state.collision:
        return replace(state, odometer=0.0, collision=False, rng=rng)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    for steer in (-sign * cfg.backup_steer, sign * cfg.backup_steer):
        backed = _reverse(world, replace(state, rng=rng), steer, cfg)
        if backed is not None:
            return backed
    return spawn_state(world, cfg, rng, clamps)


class Simulator:
    """Stateful convenience wrapper: one world, one config, one seeded RNG."""

    def __init__(self, world: World, cfg: SimConfig | None = None, seed: int = 0, mode: str = "continuous"):
        self.world = world
        self.cfg = cfg or SimConfig()
        self.mode = mode
        self.state = reset(world, self.cfg, "episodic", rng=np.random.default_rng(seed))

    def observe(self) -> np.ndarray:
        return render(self.world, self.state, self.cfg)

    def step(self, steering: float) -> StepResult:
        self.state, result = step(self.world, self.state, steering, self.cfg)
        return result

    def reset(self, mode: str | None = None) -> np.ndarray:
        self.state = reset(self.world, self.cfg, mode or self.mode, self.state)
        return self.observe()
