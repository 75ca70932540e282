"""The interaction/training loop: plan, act, record, train; plus greedy rollouts."""

from __future__ import annotations

import csv
import logging
import math
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from gcg.autodiff.optim import adam_step
from gcg.autodiff.params import save_checkpoint
from gcg.autodiff.tape import Tape
from gcg.config import RunConfig, save_config
from gcg.driver.replay import Experience, ReplayBuffer, sample_minibatch
from gcg.driver.targets import double_q_target, sync_target
from gcg.errors import TrainingError
from gcg.graph.bootstrap import compute_bootstrap, fill_bootstrap
from gcg.graph.labels import make_labels
from gcg.graph.losses import loss as graph_loss
from gcg.graph.network import GraphModel
from gcg.policy import explore, sample_sequences, schedule_at, select_action
from gcg.sim.car import Simulator
from gcg.sim.world import load_world

log = logging.getLogger(__name__)

METRICS_HEADER = ["step", "episode", "distance_m", "reward_sum", "collision", "loss_mean", "eps", "wall_clock_s"]


@dataclass
class EpisodeRecord:
    episode: int
    end_step: int  # environment steps taken when the episode ended
    distance: float
    reward_sum: float
    collision: bool


@dataclass
class RunResult:
    out_dir: Path
    metrics_path: Path
    checkpoints: list[Path]
    episodes: list[EpisodeRecord]
    model: GraphModel
    buffer: ReplayBuffer
    steps: int
    open_episode: EpisodeRecord | None = None
    losses: list[float] = field(default_factory=list)


class FrameHistory:
    """The last ``n`` frames of the current episode, zero-padded at its start."""

    def __init__(self, n: int, frame_shape, dtype):
        self.n = n
        self.zero = np.zeros(frame_shape, dtype=dtype)
        self.frames: deque = deque(maxlen=n)

    def reset(self, frame):
        self.frames.clear()
        self.frames.append(frame)

    def push(self, frame):
        self.frames.append(frame)

    def stack(self) -> np.ndarray:
        pad = [self.zero] * (self.n - len(self.frames))
        return np.stack(pad + list(self.frames))


class Trainer:
    """Samples windows, builds labels and bootstraps, and takes Adam steps.

    Reads only the buffer and its own RNG streams, never the acting policy.
    """

    def __init__(self, model: GraphModel, cfg: RunConfig, rng: np.random.Generator):
        self.model = model
        self.cfg = cfg
        self.graph = cfg.graph
        self.rng = rng
        self.target = model.with_params(model.params.snapshot()) if cfg.graph.bootstrap else None
        self.grad_steps = 0

    def train_step(self, buffer: ReplayBuffer) -> float:
        cfg, g = self.cfg, self.graph
        batch = sample_minibatch(buffer, cfg.train.batch_size, g.window, cfg.train.replay, self.rng,
                                 need_next=g.bootstrap)
        labels = make_labels(batch.slice, g, self.rng, cfg.policy.action_bound)
        if g.bootstrap:
            self._bootstrap(buffer, batch, labels)
        with Tape() as tape:
            out = self.model.forward(batch.obs, labels.actions)
            L = graph_loss(out, labels, g)
        tape.backward(L)
        a = cfg.adam
        adam_step(self.model.params, a.lr, a.beta1, a.beta2, a.eps, a.grad_clip)
        self.grad_steps += 1
        if self.target is not None:
            if g.target_tau is not None:
                sync_target(self.model.params, self.target.params, "soft", g.target_tau)
            elif self.grad_steps % g.target_sync == 0:
                sync_target(self.model.params, self.target.params, "hard")
        return float(L.value)

    def _next_values(self, obs: np.ndarray) -> np.ndarray:
        cfg, g = self.cfg, self.graph
        sampler = "iid-uniform" if cfg.policy.sampler == "iid-uniform" else "hold-constant"
        cands = sample_sequences(cfg.policy.bootstrap_K, g.horizon, sampler, cfg.policy.action_bound, self.rng)
        if cfg.train.target_rule == "double_q":
            return double_q_target(self.model, self.target, obs, cands, g)
        return compute_bootstrap(self.target, obs, g, cands)

    def _bootstrap(self, buffer, batch, labels) -> None:
        g = self.graph
        nstep = self.cfg.nstep
        if nstep is None or nstep.is_one_hot_last:
            needs = labels.needs_bootstrap
            vals = np.full(len(needs), np.nan)
            if needs.any():
                vals[needs] = self._next_values(batch.next_obs[needs])
            fill_bootstrap(labels, vals)
            return
        # general weights: V_{t+N'} for every N' carrying weight
        B, N = labels.y.shape[0], nstep.N
        length, ended = batch.slice.length, batch.slice.ended
        disc = g.gamma ** np.arange(N)
        partial = np.cumsum(labels.y[:, :N] * labels.mask[:, :N] * disc, axis=1)
        target = np.zeros(B)
        for k, w in enumerate(nstep.weights, start=1):
            if w == 0:
                continue
            V = np.zeros(B)
            alive = ~(ended & (length <= k))
            if alive.any():
                V[alive] = self._next_values(buffer.frame_stack(batch.starts[alive] + k))
            target += w * (partial[:, k - 1] + g.gamma ** k * V)
        labels.target = target
        labels.b = np.zeros(B)
        labels.needs_bootstrap = np.zeros(B, dtype=bool)


class MetricsWriter:
    def __init__(self, path: Path, wall_clock: bool):
        self.path = path
        self.wall_clock = wall_clock
        self.t0 = time.perf_counter()
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(METRICS_HEADER)

    def _clock(self):
        return f"{time.perf_counter() - self.t0:.3f}" if self.wall_clock else ""

    def episode(self, rec: EpisodeRecord, loss_mean, eps):
        self.w.writerow([rec.end_step, rec.episode, repr(rec.distance), repr(rec.reward_sum), int(rec.collision),
                         _fmt(loss_mean), repr(eps), self._clock()])

    def training(self, step, episode, loss_mean, eps):
        self.w.writerow([step, episode, "", "", "", _fmt(loss_mean), repr(eps), self._clock()])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _fmt(x):
    return "" if x is None else repr(float(x))


def _mean(xs):
    return float(np.mean(xs)) if xs else None


def build_model(cfg: RunConfig, seed: int) -> GraphModel:
    return GraphModel.create(cfg.dims(), cfg.graph, seed=seed, dtype=cfg.np_dtype)


def run(cfg: RunConfig, seed: int | None = None, out_dir=None, progress: Callable | None = None) -> RunResult:
    """Run the interaction/training loop for ``cfg.steps`` environment steps."""
    seed = cfg.seeds[0] if seed is None else seed
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    if cfg.train.async_mode:
        return _run_async(cfg, seed, out, progress)
    return _run_sync(cfg, seed, out, progress)


def _streams(seed: int):
    ss = np.random.SeedSequence(seed)
    model_ss, sim_ss, plan_ss, train_ss = ss.spawn(4)
    return (int(model_ss.generate_state(1)[0]), int(sim_ss.generate_state(1)[0]),
            np.random.default_rng(plan_ss), np.random.default_rng(train_ss))


class _Actor:
    """Environment side of the loop: observe, plan, explore, step, reset."""

    def __init__(self, cfg: RunConfig, sim_seed: int, plan_rng, dtype):
        self.cfg = cfg
        self.world = load_world(cfg.world)
        self.sim = Simulator(self.world, cfg.sim, seed=sim_seed, mode=cfg.sim_mode)
        self.rng = plan_rng
        self.hist = FrameHistory(cfg.network.n_frames, cfg.sim.frame_shape, dtype)
        self.frame = self.sim.observe().astype(dtype)
        self.hist.reset(self.frame)
        self.episode = 0
        self.ep_step = 0
        self.reward_sum = 0.0
        self.dtype = dtype

    def act(self, model: GraphModel, t: int):
        """One environment step; returns (Experience, finished EpisodeRecord or None, eps)."""
        cfg = self.cfg
        sched = schedule_at(cfg.policy, t)
        seq, _ = select_action(model, self.hist.stack(), cfg.policy, cfg.graph, self.rng)
        seq = explore(seq, sched, self.rng, cfg.policy.action_bound)
        a = float(seq[0])
        res = self.sim.step(a)
        exp = Experience(self.frame, a, res.reward, res.collision, res.done, self.episode, self.ep_step)
        self.reward_sum += res.reward
        rec = None
        if res.done:
            rec = EpisodeRecord(self.episode, t + 1, res.info["odometer"], self.reward_sum, res.collision)
            self.sim.reset()
            self.frame = self.sim.observe().astype(self.dtype)
            self.hist.reset(self.frame)
            self.episode += 1
            self.ep_step = 0
            self.reward_sum = 0.0
        else:
            self.frame = res.frame.astype(self.dtype)
            self.hist.push(self.frame)
            self.ep_step += 1
        return exp, rec, sched.eps

    def open_record(self, t: int) -> EpisodeRecord:
        return EpisodeRecord(self.episode, t, self.sim.state.odometer, self.reward_sum, False)


def _checkpoint(model: GraphModel, out: Path, step: int, ckpts: list) -> None:
    path = out / f"ckpt_{step}.gcg"
    save_checkpoint(model.params, path)
    ckpts.append(path)


def _run_sync(cfg: RunConfig, seed: int, out: Path, progress) -> RunResult:
    dtype = cfg.np_dtype
    model_seed, sim_seed, plan_rng, train_rng = _streams(seed)
    model = build_model(cfg, model_seed)
    trainer = Trainer(model, cfg, train_rng)
    buffer = ReplayBuffer(cfg.buffer_capacity, cfg.sim.frame_shape, cfg.network.n_frames, dtype)
    actor = _Actor(cfg, sim_seed, plan_rng, dtype)
    writer = MetricsWriter(out / "metrics.csv", cfg.log_wall_clock)
    episodes: list[EpisodeRecord] = []
    ckpts: list[Path] = []
    ep_losses: list[float] = []
    interval_losses: list[float] = []
    all_losses: list[float] = []
    eps = cfg.policy.eps_start
    try:
        for t in range(cfg.steps):
            exp, rec, eps = actor.act(model, t)
            buffer.add(exp)
            if t + 1 > cfg.train.learning_starts:
                for _ in range(cfg.train.grad_steps):
                    try:
                        L = trainer.train_step(buffer)
                    except TrainingError as exc:
                        _checkpoint(model, out, t + 1, ckpts)
                        raise TrainingError(f"step {t + 1}: {exc}; checkpoint written to {ckpts[-1]}") from exc
                    ep_losses.append(L)
                    interval_losses.append(L)
                    all_losses.append(L)
            if rec is not None:
                episodes.append(rec)
                writer.episode(rec, _mean(ep_losses), eps)
                ep_losses = []
            if (t + 1) % cfg.eval_interval == 0:
                writer.training(t + 1, actor.episode, _mean(interval_losses), eps)
                interval_losses = []
                if progress is not None:
                    progress(t + 1, episodes)
            if (t + 1) % cfg.train.checkpoint_interval == 0:
                _checkpoint(model, out, t + 1, ckpts)
        if not ckpts or ckpts[-1].name != f"ckpt_{cfg.steps}.gcg":
            _checkpoint(model, out, cfg.steps, ckpts)
    finally:
        writer.close()
    return RunResult(out, out / "metrics.csv", ckpts, episodes, model, buffer, cfg.steps,
                     actor.open_record(cfg.steps), all_losses)


def _run_async(cfg: RunConfig, seed: int, out: Path, progress) -> RunResult:
    """Actor thread collects experience on a parameter snapshot; this thread trains.

    Snapshots are published every ``snapshot_period`` gradient steps.
    Nondeterministic by construction.
    """
    dtype = cfg.np_dtype
    model_seed, sim_seed, plan_rng, train_rng = _streams(seed)
    model = build_model(cfg, model_seed)
    trainer = Trainer(model, cfg, train_rng)
    buffer = ReplayBuffer(cfg.buffer_capacity, cfg.sim.frame_shape, cfg.network.n_frames, dtype)
    actor = _Actor(cfg, sim_seed, plan_rng, dtype)
    shared = {"model": model.with_params(model.params.snapshot())}
    lock = threading.Lock()
    inbox: queue.Queue = queue.Queue()
    error: list[BaseException] = []

    def actor_loop():
        try:
            for t in range(cfg.steps):
                with lock:
                    snap = shared["model"]
                inbox.put((t,) + actor.act(snap, t))
        except BaseException as exc:  # surfaced in the trainer thread
            error.append(exc)
        finally:
            inbox.put(None)

    writer = MetricsWriter(out / "metrics.csv", cfg.log_wall_clock)
    episodes, ckpts, all_losses, ep_losses, interval = [], [], [], [], []
    thread = threading.Thread(target=actor_loop, name="gcg-actor", daemon=True)
    thread.start()
    collected = 0
    try:
        while True:
            item = inbox.get()
            if item is None:
                break
            t, exp, rec, eps = item
            buffer.add(exp)
            collected = t + 1
            budget = cfg.train.grad_steps * max(0, collected - cfg.train.learning_starts)
            while trainer.grad_steps < budget and inbox.empty():
                L = trainer.train_step(buffer)
                all_losses.append(L)
                ep_losses.append(L)
                interval.append(L)
                if trainer.grad_steps % cfg.train.snapshot_period == 0:
                    with lock:
                        shared["model"] = model.with_params(model.params.snapshot())
            if rec is not None:
                episodes.append(rec)
                writer.episode(rec, _mean(ep_losses), eps)
                ep_losses = []
            if collected % cfg.eval_interval == 0:
                writer.training(collected, actor.episode, _mean(interval), eps)
                interval = []
            if collected % cfg.train.checkpoint_interval == 0:
                _checkpoint(model, out, collected, ckpts)
        thread.join()
        if error:
            raise error[0]
        if not ckpts or ckpts[-1].name != f"ckpt_{cfg.steps}.gcg":
            _checkpoint(model, out, cfg.steps, ckpts)
    finally:
        writer.close()
    return RunResult(out, out / "metrics.csv", ckpts, episodes, model, buffer, cfg.steps,
                     actor.open_record(cfg.steps), all_losses)


def train_offline(buffer: ReplayBuffer, cfg: RunConfig, steps: int, seed: int = 0) -> GraphModel:
    """Fit a fresh model to a frozen buffer; depends on nothing but the buffer contents and seed."""
    model_seed, _, _, train_rng = _streams(seed)
    model = build_model(cfg, model_seed)
    trainer = Trainer(model, cfg, train_rng)
    for _ in range(steps):
        trainer.train_step(buffer)
    return model


def rollout(policy: Callable[[np.ndarray, np.random.Generator], float], cfg: RunConfig, world, episodes: int,
            seed: int, max_steps: int | None = None) -> list[float]:
    """Distance travelled in each of ``episodes`` episodes started from the spawn pose."""
    sim = Simulator(world, cfg.sim, seed=seed, mode="episodic")
    rng = np.random.default_rng(seed + 7919)
    cap = max_steps or int(math.ceil(cfg.sim.episode_cap / (cfg.sim.speed * cfg.sim.dt))) + 1
    dtype = cfg.np_dtype
    out = []
    for _ in range(episodes):
        sim.reset("episodic")
        hist = FrameHistory(cfg.network.n_frames, cfg.sim.frame_shape, dtype)
        hist.reset(sim.observe().astype(dtype))
        for _ in range(cap):
            res = sim.step(policy(hist.stack(), rng))
            if res.done:
                break
            hist.push(res.frame.astype(dtype))
        out.append(sim.state.odometer)
    return out


def rollout_continuous(policy: Callable[[np.ndarray, np.random.Generator], float], cfg: RunConfig, world,
                       steps: int, seed: int) -> list[float]:
    """Distances of the episodes completed in ``steps`` continuous-mode steps (crash, back up, go on)."""
    sim = Simulator(world, cfg.sim, seed=seed, mode="continuous")
    rng = np.random.default_rng(seed + 7919)
    dtype = cfg.np_dtype
    hist = FrameHistory(cfg.network.n_frames, cfg.sim.frame_shape, dtype)
    hist.reset(sim.observe().astype(dtype))
    out = []
    for _ in range(steps):
        res = sim.step(policy(hist.stack(), rng))
        if res.done:
            out.append(res.info["odometer"])
            sim.reset()
            hist.reset(sim.observe().astype(dtype))
        else:
            hist.push(res.frame.astype(dtype))
    return out


def greedy_policy(model: GraphModel, cfg: RunConfig):
    def act(obs, rng):
        seq, _ = select_action(model, obs, cfg.policy, cfg.graph, rng)
        return float(seq[0])
    return act


def random_policy(cfg: RunConfig):
    bound = cfg.policy.action_bound

    def act(obs, rng):
        return float(rng.uniform(-bound, bound))
    return act
