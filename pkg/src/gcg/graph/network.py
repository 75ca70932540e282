"""The recurrent navigation network G(s, A) and its parameter initialization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gcg.autodiff import ops
from gcg.autodiff.layers import GATES, affine, conv2d, mi_lstm_cell
from gcg.autodiff.params import ParamStore
from gcg.autodiff.tape import Tensor
from gcg.errors import ConfigError, UsageError
from gcg.graph.config import GraphConfig


@dataclass
class NetworkDims:
    frame_shape: tuple[int, ...] = (36, 64)  # (H, W) images or (D,) ray vectors
    n_frames: int = 4
    conv_filters: tuple[int, ...] = (16, 16)
    conv_kernel: int = 5
    conv_stride: int = 2
    hidden: int = 64
    action_embed: int = 16
    rnn_width: int = 64
    action_scale: float = 1.0 / math.radians(30.0)

    def __post_init__(self):
        self.frame_shape = tuple(int(v) for v in self.frame_shape)
        self.conv_filters = tuple(int(v) for v in self.conv_filters)
        if len(self.frame_shape) not in (1, 2):
            raise ConfigError(f"frame_shape must have 1 or 2 dims, got {self.frame_shape}")

    @property
    def obs_shape(self) -> tuple[int, ...]:
        return (self.n_frames,) + self.frame_shape


@dataclass
class ModelOutputs:
    """Per-step outputs (B, H) and terminal output (B,); arrays or tensors."""

    y_hat: object
    b_hat: object
    extras: dict = field(default_factory=dict)


class NavNetwork:
    """Frame stack -> encoder -> initial hidden state; actions drive the recurrent unroll."""

    def __init__(self, dims: NetworkDims, config: GraphConfig):
        self.dims = dims
        self.config = config
        self.image = len(dims.frame_shape) == 2
        self.standard_cell = config.recurrent_cell == "lstm"
        self._encoded_size = self._encoder_out_size()

    def _encoder_out_size(self) -> int:
        d = self.dims
        if not self.image:
            return d.n_frames * d.frame_shape[0]
        h, w = d.frame_shape
        c = d.n_frames
        for f in d.conv_filters:
            if d.conv_kernel > h or d.conv_kernel > w:
                raise ConfigError(f"conv kernel {d.conv_kernel} larger than feature map {h}x{w}")
            h = (h - d.conv_kernel) // d.conv_stride + 1
            w = (w - d.conv_kernel) // d.conv_stride + 1
            c = f
        return c * h * w

    def init_params(self, rng: np.random.Generator, dtype=np.float64) -> ParamStore:
        """Orthogonal recurrent blocks, fan-in scaled uniform elsewhere, forget bias +1."""
        d = self.dims
        store = ParamStore(dtype)

        def uniform(shape, fan_in):
            lim = math.sqrt(3.0 / fan_in)
            return rng.uniform(-lim, lim, size=shape)

        if self.image:
            c = d.n_frames
            for i, f in enumerate(d.conv_filters):
                fan = c * d.conv_kernel ** 2
                store.add(f"enc.conv{i}.k", uniform((f, c, d.conv_kernel, d.conv_kernel), fan))
                store.add(f"enc.conv{i}.b", np.zeros(f))
                c = f
        store.add("enc.fc.W", uniform((d.hidden, self._encoded_size), self._encoded_size))
        store.add("enc.fc.b", np.zeros(d.hidden))
        if d.hidden != d.rnn_width:
            store.add("enc.h0.W", uniform((d.rnn_width, d.hidden), d.hidden))
            store.add("enc.h0.b", np.zeros(d.rnn_width))
        store.add("act.W", uniform((d.action_embed, 1), 1))
        store.add("act.b", np.zeros(d.action_embed))

        n = d.rnn_width
        store.add("rnn.Wx", uniform((GATES * n, d.action_embed), d.action_embed))
        store.add("rnn.Uh", np.concatenate([_orthogonal(rng, n) for _ in range(GATES)], axis=0))
        b = np.zeros(GATES * n)
        b[n:2 * n] = 1.0
        store.add("rnn.b", b)
        if not self.standard_cell:
            store.add("rnn.alpha", np.ones(GATES * n))
            store.add("rnn.beta1", np.ones(GATES * n))
            store.add("rnn.beta2", np.ones(GATES * n))
        store.add("head_y.W", uniform((1, n), n))
        store.add("head_y.b", np.zeros(1))
        store.add("head_b.W", uniform((1, n), n))
        store.add("head_b.b", np.zeros(1))
        return store

    def _params(self, store: ParamStore, track: bool) -> dict:
        if track:
            return store.tensors()
        return {k: Tensor(v) for k, v in store.params.items()}

    def encode(self, p: dict, obs: np.ndarray) -> Tensor:
        d = self.dims
        x = Tensor(obs)
        if self.image:
            for i in range(len(d.conv_filters)):
                x = ops.relu(conv2d(p[f"enc.conv{i}.k"], p[f"enc.conv{i}.b"], x, d.conv_stride))
        x = ops.reshape(x, (obs.shape[0], -1))
        h = ops.relu(affine(p["enc.fc.W"], p["enc.fc.b"], x))
        if "enc.h0.W" in p:
            h = ops.relu(affine(p["enc.h0.W"], p["enc.h0.b"], h))
        return h

    def unroll(self, p: dict, h0: Tensor, actions: np.ndarray) -> tuple[Tensor, Tensor]:
        """Run the recurrent cell over (B, H) actions; returns raw per-step and terminal heads."""
        d = self.dims
        B, H = actions.shape
        a = Tensor((actions * d.action_scale).reshape(B * H, 1).astype(h0.value.dtype, copy=False))
        emb = ops.relu(affine(p["act.W"], p["act.b"], a))
        steps = ops.unstack(ops.reshape(emb, (B, H, d.action_embed)), axis=1)
        cell = {k[4:]: v for k, v in p.items() if k.startswith("rnn.")}
        h = h0
        c = Tensor(np.zeros(h0.shape, dtype=h0.value.dtype))
        hs = []
        for x in steps:
            h, c = mi_lstm_cell(h, c, x, cell, standard=self.standard_cell)
            hs.append(h)
        hidden = ops.reshape(ops.stack(hs, axis=1), (B * H, d.rnn_width))
        y_raw = ops.reshape(affine(p["head_y.W"], p["head_y.b"], hidden), (B, H))
        b_raw = ops.reshape(affine(p["head_b.W"], p["head_b.b"], h), (B,))
        return y_raw, b_raw

    def forward(self, store: ParamStore, obs, actions, track: bool = False, pairs: bool = False) -> ModelOutputs:
        """Outputs for observations (B, *obs_shape) and action sequences (K, H).

        K == B pairs rows; B == 1 broadcasts one observation over K sequences;
        ``pairs=True`` evaluates every (observation, sequence) combination and
        returns rows ordered observation-major (B*K).
        """
        obs = np.asarray(obs, dtype=store.dtype)
        actions = np.asarray(actions, dtype=store.dtype)
        if actions.ndim == 1:
            actions = actions[None]
        if obs.shape[1:] != self.dims.obs_shape:
            raise ConfigError(f"observation shape {obs.shape[1:]} != network input {self.dims.obs_shape}")
        if actions.shape[1] != self.config.horizon:
            raise UsageError(f"action sequence length {actions.shape[1]} != model horizon {self.config.horizon}")
        B, K = obs.shape[0], actions.shape[0]
        p = self._params(store, track)
        h0 = self.encode(p, obs)
        if pairs:
            h0 = ops.repeat_rows(h0, K)
            actions = np.tile(actions, (B, 1))
        elif B == 1 and K > 1:
            h0 = ops.repeat_rows(h0, K)
        elif B != K:
            raise UsageError(f"cannot pair {B} observations with {K} action sequences")
        y_raw, b_raw = self.unroll(p, h0, actions)
        if self.config.output_mode == "collision":
            y = ops.survival_probs(y_raw) if self.config.monotonic_outputs else ops.sigmoid(y_raw)
            b = ops.sigmoid(b_raw)
        else:
            y, b = y_raw, b_raw
        return ModelOutputs(y, b)


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


class GraphModel:
    """A network bound to a parameter store; the object planners and trainers share."""

    def __init__(self, network: NavNetwork, params: ParamStore):
        self.network = network
        self.params = params

    @property
    def config(self) -> GraphConfig:
        return self.network.config

    @classmethod
    def create(cls, dims: NetworkDims, config: GraphConfig, seed: int = 0, dtype=np.float64) -> "GraphModel":
        net = NavNetwork(dims, config)
        return cls(net, net.init_params(np.random.default_rng(seed), dtype))

    def predict(self, obs, actions, pairs: bool = False) -> ModelOutputs:
        out = self.network.forward(self.params, obs, actions, track=False, pairs=pairs)
        return ModelOutputs(out.y_hat.value, out.b_hat.value)

    def forward(self, obs, actions) -> ModelOutputs:
        """Tracked forward pass; call inside an active :class:`Tape`."""
        return self.network.forward(self.params, obs, actions, track=True)

    def with_params(self, params: ParamStore) -> "GraphModel":
        return GraphModel(self.network, params)


def predict(model: GraphModel, observation, action_sequence) -> ModelOutputs:
    return model.predict(observation, action_sequence)
