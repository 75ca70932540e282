"""FIFO ring buffer of single steps, sampled as episode-aware windows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gcg.errors import ConfigError, InvariantError, UsageError
from gcg.graph.labels import EpisodeSlice

REPLAY_MODES = ("uniform", "prioritized")


@dataclass
class Experience:
    frame: np.ndarray
    action: float
    reward: float
    collision: bool
    done: bool
    episode: int
    step: int


@dataclass
class Batch:
    obs: np.ndarray  # (B, n_frames, *frame_shape) frame stacks at window starts
    slice: EpisodeSlice
    next_obs: np.ndarray  # frame stacks at start + window (zeros where the episode ended)
    starts: np.ndarray  # global step indices of the window starts
    collision_windows: np.ndarray  # (B,) bool


class ReplayBuffer:
    """Ring buffer with strict FIFO eviction.

    Steps are addressed by a global index that keeps counting past the
    capacity; ``oldest`` is the first index still stored.
    """

    def __init__(self, capacity: int, frame_shape, n_frames: int = 4, dtype=np.float32):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self.frame_shape = tuple(frame_shape)
        self.n_frames = n_frames
        self.frames = np.zeros((self.capacity,) + self.frame_shape, dtype=dtype)
        self.actions = np.zeros(self.capacity)
        self.rewards = np.zeros(self.capacity)
        self.collision = np.zeros(self.capacity, dtype=bool)
        self.done = np.zeros(self.capacity, dtype=bool)
        self.episode = np.zeros(self.capacity, dtype=np.int64)
        self.step = np.zeros(self.capacity, dtype=np.int64)
        self.total = 0
        # per-episode bookkeeping, parallel lists in increasing episode id
        self._ep_ids: list[int] = []
        self._ep_last: list[int] = []
        self._ep_done: list[bool] = []
        self._ep_coll: list[bool] = []
        self._cache = None

    @property
    def oldest(self) -> int:
        return max(0, self.total - self.capacity)

    def __len__(self):
        return self.total - self.oldest

    def add(self, exp: Experience) -> None:
        if exp.collision and not exp.done:
            raise InvariantError("a collision step must end its episode")
        if self._ep_ids and exp.episode == self._ep_ids[-1]:
            if self._ep_done[-1]:
                raise InvariantError(f"episode {exp.episode} already ended")
            prev = self.step[(self.total - 1) % self.capacity]
            if exp.step != prev + 1:
                raise InvariantError(f"episode {exp.episode}: step {exp.step} does not follow {prev}")
        else:
            if self._ep_ids and exp.episode < self._ep_ids[-1]:
                raise InvariantError("episode ids must increase")
            if self._ep_ids and not self._ep_done[-1]:
                # the unfinished episode is abandoned: treat it as ended without collision
                self._ep_done[-1] = True
            self._ep_ids.append(int(exp.episode))
            self._ep_last.append(self.total)
            self._ep_done.append(False)
            self._ep_coll.append(False)
        i = self.total % self.capacity
        self.frames[i] = exp.frame
        self.actions[i] = exp.action
        self.rewards[i] = exp.reward
        self.collision[i] = exp.collision
        self.done[i] = exp.done
        self.episode[i] = exp.episode
        self.step[i] = exp.step
        self._ep_last[-1] = self.total
        self._ep_done[-1] = bool(exp.done)
        self._ep_coll[-1] = bool(exp.collision)
        self.total += 1
        self._cache = None
        self._prune()

    def _prune(self):
        # drop bookkeeping for episodes entirely evicted
        drop = 0
        while drop < len(self._ep_last) - 1 and self._ep_last[drop] < self.oldest:
            drop += 1
        if drop:
            del self._ep_ids[:drop], self._ep_last[:drop], self._ep_done[:drop], self._ep_coll[:drop]

    def _episode_info(self, g: np.ndarray):
        ep = self.episode[g % self.capacity]
        k = np.searchsorted(np.asarray(self._ep_ids), ep)
        return (np.asarray(self._ep_last, dtype=np.int64)[k], np.asarray(self._ep_done, dtype=bool)[k],
                np.asarray(self._ep_coll, dtype=bool)[k])

    def windows(self, window: int, need_next: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Valid window starts and which of them end in a collision.

        A start is valid if its frame stack is still stored and either its
        episode ends inside the window or ``window`` steps (plus one more
        when ``need_next``) have been recorded.
        """
        key = (window, need_next)
        if self._cache is not None and self._cache[0] == key:
            return self._cache[1]
        g = np.arange(self.oldest, self.total, dtype=np.int64)
        if g.size == 0:
            res = (g, np.zeros(0, dtype=bool))
        else:
            last, done, coll = self._episode_info(g)
            stepi = self.step[g % self.capacity]
            frames_ok = g - np.minimum(stepi, self.n_frames - 1) >= self.oldest
            end_inside = done & (last <= g + window - 1)
            full = last >= g + window - 1 + int(need_next)
            ok = frames_ok & (end_inside | full)
            res = (g[ok], (end_inside & coll)[ok])
        self._cache = (key, res)
        return res

    def frame_stack(self, g: np.ndarray) -> np.ndarray:
        """Frame stacks ending at global indices ``g``, zero-padded at episode starts."""
        g = np.asarray(g, dtype=np.int64)
        stepi = self.step[g % self.capacity]
        out = np.zeros((len(g), self.n_frames) + self.frame_shape, dtype=self.frames.dtype)
        for j in range(self.n_frames):
            back = self.n_frames - 1 - j
            ok = stepi >= back
            out[ok, j] = self.frames[(g[ok] - back) % self.capacity]
        return out

    def gather(self, starts: np.ndarray, window: int) -> Batch:
        starts = np.asarray(starts, dtype=np.int64)
        last, done, coll = self._episode_info(starts)
        idx = starts[:, None] + np.arange(window)[None, :]
        valid = idx <= last[:, None]
        phys = np.minimum(idx, last[:, None]) % self.capacity
        length = np.minimum(window, last - starts + 1)
        ended = done & (last <= starts + window - 1)
        sl = EpisodeSlice(
            np.where(valid, self.actions[phys], 0.0),
            np.where(valid, self.rewards[phys], 0.0),
            valid & self.collision[phys],
            length,
            ended,
        )
        nxt = np.zeros((len(starts), self.n_frames) + self.frame_shape, dtype=self.frames.dtype)
        has_next = ~ended & (starts + window <= self.total - 1)
        if has_next.any():
            nxt[has_next] = self.frame_stack(starts[has_next] + window)
        return Batch(self.frame_stack(starts), sl, nxt, starts, ended & coll)


def sample_minibatch(buffer: ReplayBuffer, batch_size: int, window: int, mode: str,
                     rng: np.random.Generator, need_next: bool = False) -> Batch:
    """Sample windows uniformly, or with exactly ceil(B/2) collision-terminated windows."""
    if mode not in REPLAY_MODES:
        raise ConfigError(f"replay mode must be one of {REPLAY_MODES}, got {mode!r}")
    starts, coll = buffer.windows(window, need_next)
    if starts.size == 0:
        raise UsageError("replay buffer holds no complete window")
    if mode == "uniform":
        pick = starts[rng.integers(starts.size, size=batch_size)]
        return buffer.gather(pick, window)
    coll_starts, other = starts[coll], starts[~coll]
    n_coll = int(math.ceil(batch_size / 2))
    if coll_starts.size == 0:
        pick = starts[rng.integers(starts.size, size=batch_size)]
    else:
        a = rng.choice(coll_starts, size=n_coll, replace=coll_starts.size < n_coll)
        pool = other if other.size else coll_starts
        b = pool[rng.integers(pool.size, size=batch_size - n_coll)]
        pick = np.concatenate([a, b])
    return buffer.gather(pick, window)
