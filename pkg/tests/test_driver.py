import csv
import dataclasses

import numpy as np
import pytest

from gcg.autodiff.params import ParamStore, load_checkpoint
from gcg.config import NetworkConfig, RunConfig, TrainConfig
from gcg.driver.replay import Experience, ReplayBuffer, sample_minibatch
from gcg.driver.run import METRICS_HEADER, run, train_offline
from gcg.driver.targets import NStepConfig, double_q_target, nstep_weighted_return, sync_target
from gcg.errors import ConfigError, InvariantError, TrainingError, UsageError
from gcg.graph.bootstrap import compute_bootstrap
from gcg.graph.config import GraphConfig
from gcg.graph.labels import make_labels
from gcg.graph.network import ModelOutputs
from gcg.policy import PolicyConfig


def fill(buf, lengths, collide, frame_dim=2):
    """Episodes of the given lengths; frame value = global index + 1."""
    g = 0
    for ep, (n, c) in enumerate(zip(lengths, collide)):
        for k in range(n):
            last = k == n - 1
            buf.add(Experience(np.full(frame_dim, g + 1.0), 0.01 * g, 0.0 if (last and c) else 2.0,
                               bool(last and c), last, ep, k))
            g += 1


def small_cfg(**kw) -> RunConfig:
    base = dict(
        name="small", steps=100, eval_interval=25, buffer_capacity=1000,
        graph=GraphConfig(horizon=3, label_horizon=3),
        network=NetworkConfig(hidden=8, action_embed=4, rnn_width=8),
        policy=PolicyConfig(K=8, eps_decay_steps=50, noise_decay_steps=50),
        train=TrainConfig(batch_size=4, learning_starts=20, checkpoint_interval=50),
        seeds=[0], log_wall_clock=False,
    )
    base.update(kw)
    return RunConfig(**base)


# replay buffer

def test_collision_must_end_episode():
    buf = ReplayBuffer(10, (2,))
    with pytest.raises(InvariantError):
        buf.add(Experience(np.zeros(2), 0.0, 0.0, True, False, 0, 0))


def test_noncontiguous_steps_rejected():
    buf = ReplayBuffer(10, (2,))
    buf.add(Experience(np.zeros(2), 0.0, 2.0, False, False, 0, 0))
    with pytest.raises(InvariantError):
        buf.add(Experience(np.zeros(2), 0.0, 2.0, False, False, 0, 2))


def test_single_episode_single_window():
    H = 4
    buf = ReplayBuffer(100, (2,))
    for k in range(H):
        buf.add(Experience(np.full(2, k + 1.0), 0.0, 2.0, False, False, 0, k))
    starts, coll = buf.windows(H)
    np.testing.assert_array_equal(starts, [0])
    assert not coll.any()
    b = sample_minibatch(buf, 5, H, "uniform", np.random.default_rng(0))
    np.testing.assert_array_equal(b.starts, 0)
    np.testing.assert_array_equal(b.slice.length, H)


def test_collision_episode_windows_include_short_tails():
    H = 4
    buf = ReplayBuffer(100, (2,))
    fill(buf, [H], [True])
    starts, coll = buf.windows(H)
    np.testing.assert_array_equal(starts, [0, 1, 2, 3])
    assert coll.all()


def test_empty_buffer_usage_error():
    with pytest.raises(UsageError):
        sample_minibatch(ReplayBuffer(10, (2,)), 4, 3, "uniform", np.random.default_rng(0))


def test_window_near_episode_end_masked_or_extended():
    H = 4
    buf = ReplayBuffer(100, (2,))
    fill(buf, [6, 5], [True, False])
    batch = buf.gather(np.array([4]), H)  # 2 steps before the end of episode 0
    assert batch.slice.length[0] == 2 and batch.slice.ended[0]
    np.testing.assert_array_equal(batch.slice.collisions[0], [False, True, False, False])
    clip = make_labels(batch.slice, GraphConfig(horizon=H, label_horizon=H, label_extension="clip"))
    np.testing.assert_array_equal(clip.mask[0], [1, 1, 0, 0])
    ext = make_labels(batch.slice, GraphConfig(horizon=H, label_horizon=H), np.random.default_rng(0))
    np.testing.assert_array_equal(ext.y[0], [0, 1, 1, 1])
    np.testing.assert_array_equal(ext.mask[0], 1)


def test_windows_never_span_episodes():
    buf = ReplayBuffer(100, (2,))
    fill(buf, [3, 7, 2, 9], [True, False, True, False])
    starts, _ = buf.windows(4)
    b = buf.gather(starts, 4)
    for s, n in zip(starts, b.slice.length):
        eps = buf.episode[np.arange(s, s + n) % buf.capacity]
        assert (eps == eps[0]).all()


def test_frame_stack_zero_padded_at_episode_start():
    buf = ReplayBuffer(100, (2,), n_frames=4)
    fill(buf, [3, 5], [True, False])
    st = buf.frame_stack(np.array([4]))  # step 1 of episode 1
    np.testing.assert_array_equal(st[:, :, 0], [[0, 0, 4, 5]])
    st = buf.frame_stack(np.array([7]))
    np.testing.assert_array_equal(st[:, :, 0], [[5, 6, 7, 8]])


def test_fifo_eviction():
    buf = ReplayBuffer(5, (1,), n_frames=1)
    fill(buf, [4, 4], [True, True], frame_dim=1)
    assert len(buf) == 5 and buf.oldest == 3
    kept = sorted(buf.frames[:, 0])
    assert kept == [4.0, 5.0, 6.0, 7.0, 8.0]
    starts, _ = buf.windows(2)
    assert starts.min() >= buf.oldest


def test_prioritized_quota_exact():
    buf = ReplayBuffer(1000, (2,))
    fill(buf, [10] * 20, [i % 3 == 0 for i in range(20)])
    for B in (16, 15, 7):
        b = sample_minibatch(buf, B, 4, "prioritized", np.random.default_rng(B))
        assert b.collision_windows.sum() == -(-B // 2)
        assert b.slice.collisions.any(axis=1).sum() == -(-B // 2)


def test_prioritized_scarce_collisions_with_replacement():
    buf = ReplayBuffer(1000, (2,))
    fill(buf, [30, 2], [False, True])
    b = sample_minibatch(buf, 16, 4, "prioritized", np.random.default_rng(0))
    assert b.collision_windows.sum() == 8


# targets

def test_nstep_example():
    assert nstep_weighted_return([2, 2, 2], 4.0, 0.5, NStepConfig.one_hot(3)) == 4.0


def test_nstep_one_step():
    assert nstep_weighted_return([3.0], 5.0, 0.9, NStepConfig.one_hot(1)) == pytest.approx(3 + 0.9 * 5)


def test_nstep_uniform_weights():
    r, V, gamma = [1.0, 3.0], [10.0, 20.0], 0.8
    v1 = 1.0 + 0.8 * 10.0
    v2 = 1.0 + 0.8 * 3.0 + 0.64 * 20.0
    assert nstep_weighted_return(r, V, gamma, NStepConfig(2, [0.5, 0.5])) == pytest.approx((v1 + v2) / 2)


def test_nstep_weights_validated():
    with pytest.raises(ConfigError):
        NStepConfig(2, [0.7, 0.7])
    with pytest.raises(ConfigError):
        NStepConfig(2, [1.2, -0.2])
    with pytest.raises(ConfigError):
        nstep_weighted_return([1, 1], 1.0, 0.9, NStepConfig(2, [0.5, 0.5]))


class Lookup:
    def __init__(self, table):
        self.table = table

    def predict(self, obs, actions, pairs=False):
        y = np.array([[self.table(o, a)] for o in obs for a in actions])
        return ModelOutputs(y, np.zeros(len(y)))


def test_double_q_same_params_is_max():
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=1, label_horizon=1, bootstrap=True, gamma=0.9)
    q = Lookup(lambda o, a: float(np.sin(3 * o[0] + 5 * a[0])))
    obs, cands = np.array([[0.1], [0.7]]), np.array([[-0.5], [0.0], [0.5]])
    np.testing.assert_allclose(double_q_target(q, q, obs, cands, g), compute_bootstrap(q, obs, g, cands))


def test_double_q_constant_target():
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=1, label_horizon=1, bootstrap=True)
    on = Lookup(lambda o, a: float(a[0]))
    tg = Lookup(lambda o, a: 4.0)
    np.testing.assert_array_equal(double_q_target(on, tg, np.zeros((3, 1)), np.array([[0.1], [0.2]]), g), 4.0)


def test_sync_target_modes():
    on, tg = ParamStore(), ParamStore()
    on.add("w", np.array([1.0]))
    tg.add("w", np.array([0.0]))
    sync_target(on, tg, "soft", 0.0)
    assert tg["w"][0] == 0.0
    sync_target(on, tg, "soft", 0.5)
    sync_target(on, tg, "soft", 0.5)
    assert tg["w"][0] == 0.75
    sync_target(on, tg, "hard")
    assert tg.equal(on)
    with pytest.raises(ConfigError):
        sync_target(on, tg, "lazy")


# run loop

def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_bookkeeping(tmp_path):
    res = run(small_cfg(), seed=0, out_dir=tmp_path)
    assert res.buffer.total == 100
    rows = _rows(res.metrics_path)
    assert list(rows[0]) == METRICS_HEADER
    train_rows = [r for r in rows if r["distance_m"] == ""]
    assert [int(r["step"]) for r in train_rows] == [25, 50, 75, 100]
    ep_rows = [r for r in rows if r["distance_m"] != ""]
    assert len(ep_rows) == len(res.episodes) > 0
    assert all(r["wall_clock_s"] == "" for r in rows)
    assert [p.name for p in res.checkpoints] == ["ckpt_50.gcg", "ckpt_100.gcg"]
    assert load_checkpoint(res.checkpoints[-1]).equal(res.model.params)
    assert (tmp_path / "config.yaml").exists()


def test_run_deterministic(tmp_path):
    a = run(small_cfg(), seed=3, out_dir=tmp_path / "a")
    b = run(small_cfg(), seed=3, out_dir=tmp_path / "b")
    assert a.metrics_path.read_bytes() == b.metrics_path.read_bytes()
    assert a.checkpoints[-1].read_bytes() == b.checkpoints[-1].read_bytes()
    c = run(small_cfg(), seed=4, out_dir=tmp_path / "c")
    assert c.metrics_path.read_bytes() != a.metrics_path.read_bytes()


def test_run_with_wall_clock(tmp_path):
    res = run(small_cfg(log_wall_clock=True, steps=30), seed=0, out_dir=tmp_path)
    assert all(r["wall_clock_s"] != "" for r in _rows(res.metrics_path))


def test_nonfinite_loss_checkpoints_and_aborts(tmp_path, monkeypatch):
    import gcg.driver.run as drv

    def boom(*a, **k):
        raise TrainingError("non-finite loss nan")

    monkeypatch.setattr(drv, "graph_loss", boom)
    with pytest.raises(TrainingError) as exc:
        run(small_cfg(), seed=0, out_dir=tmp_path)
    assert "step 21" in str(exc.value)
    assert (tmp_path / "ckpt_21.gcg").exists()


@pytest.mark.parametrize("preset_name", ["dql", "nstep-dql-5", "maql", "collision-bootstrap", "grid-G2"])
def test_bootstrapped_presets_train(tmp_path, preset_name):
    from gcg.experiments.presets import preset
    cfg = preset(preset_name)
    cfg = dataclasses.replace(cfg, steps=60, eval_interval=30, seeds=[0], log_wall_clock=False,
                              network=NetworkConfig(hidden=8, action_embed=4, rnn_width=8),
                              policy=dataclasses.replace(cfg.policy, K=8, bootstrap_K=4),
                              train=dataclasses.replace(cfg.train, batch_size=4, learning_starts=30))
    cfg.graph.target_sync = 10
    res = run(cfg, seed=0, out_dir=tmp_path)
    assert res.buffer.total == 60 and len(res.losses) == 30 and np.isfinite(res.losses).all()


def test_weighted_nstep_path(tmp_path):
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=1, label_horizon=3, bootstrap=True)
    cfg = small_cfg(graph=g, nstep=NStepConfig(3, [0.2, 0.3, 0.5]), steps=50,
                    policy=PolicyConfig(K=8, bootstrap_K=4),
                    train=TrainConfig(batch_size=4, learning_starts=25, target_rule="double_q"))
    res = run(cfg, seed=0, out_dir=tmp_path)
    assert len(res.losses) == 25 and np.isfinite(res.losses).all()


def test_async_mode_smoke(tmp_path):
    cfg = small_cfg(train=TrainConfig(batch_size=4, learning_starts=20, async_mode=True, snapshot_period=5),
                    steps=80, eval_interval=40)
    res = run(cfg, seed=0, out_dir=tmp_path)
    assert res.buffer.total == 80
    assert res.checkpoints[-1].name == "ckpt_80.gcg"


def test_train_offline_ignores_collector(tmp_path):
    cfg = small_cfg()
    res = run(cfg, seed=0, out_dir=tmp_path)
    a = train_offline(res.buffer, cfg, 10, seed=5)
    b = train_offline(res.buffer, cfg, 10, seed=5)
    assert a.params.equal(b.params)


@pytest.mark.slow
def test_learning_smoke_h8():
    """Collision/CE/H = 8/no bootstrap beats random steering 5x over the last 10% of 50k steps."""
    from conftest import learning_run
    from gcg.experiments.evaluate import random_baseline
    from gcg.experiments.presets import preset

    cfg = preset("gcg")
    cfg = dataclasses.replace(cfg, name="smoke-h8", graph=dataclasses.replace(cfg.graph, horizon=8, label_horizon=8))
    info = learning_run(cfg, seed=0)
    base = random_baseline(cfg, steps=10_000, seed=123).mean
    print(f"H=8 final {info['final']:.2f} m vs random {base:.2f} m")
    assert info["steps"] == 50_000
    assert info["final"] >= 5 * base
