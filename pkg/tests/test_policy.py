import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import random_obs, tiny_model
from gcg.errors import ConfigError
from gcg.graph.config import GraphConfig
from gcg.graph.network import ModelOutputs
from gcg.policy import (PolicyConfig, ScheduleState, cem_optimize, enumerate_sequences, evaluate_J, explore,
                        sample_sequences, schedule_at, select_action, select_action_shooting)

BOUND = math.radians(30)


def test_J_value_mode():
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=2, label_horizon=2, gamma=1.0, bootstrap=True)
    assert evaluate_J(ModelOutputs(np.array([[2.0, 2.0]]), np.array([10.0])), g) == 14.0


def test_J_collision_mode():
    g = GraphConfig(horizon=2, label_horizon=2, bootstrap=True)
    assert evaluate_J(ModelOutputs(np.array([[0.1, 0.2]]), np.array([0.3])), g) == pytest.approx(-0.6)


def test_J_discounted():
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=2, label_horizon=2, gamma=0.5, bootstrap=True)
    assert evaluate_J(ModelOutputs(np.array([[2.0, 2.0]]), np.array([4.0])), g) == 4.0


def test_J_bootstrap_off_ignores_b():
    g = GraphConfig(horizon=2, label_horizon=2, bootstrap=False)
    assert evaluate_J(ModelOutputs(np.array([[0.1, 0.2]]), np.array([0.9])), g) == pytest.approx(-0.3)


class TableModel:
    """J-relevant outputs looked up from a per-sequence table."""

    def __init__(self, fn, H):
        self.fn, self.H = fn, H

    def predict(self, obs, actions, pairs=False):
        y = np.array([self.fn(a) for a in actions], dtype=float).reshape(len(actions), self.H)
        return ModelOutputs(y, np.zeros(len(actions)))

    class network:
        class dims:
            obs_shape = (1,)


def test_shooting_matches_enumeration():
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=2, label_horizon=2, gamma=0.9)
    seqs = enumerate_sequences([-0.5, 0.0, 0.5], 2)
    assert seqs.shape == (9, 2)
    r = np.random.default_rng(0)
    table = {tuple(s): r.normal(size=2) for s in seqs}
    model = TableModel(lambda a: table[tuple(a)], 2)
    best, J = select_action_shooting(model, np.zeros(1), PolicyConfig(K=9), g, r, candidates=seqs)
    ref = max(seqs, key=lambda s: table[tuple(s)] @ np.array([1, 0.9]))
    np.testing.assert_array_equal(best, ref)


def test_shooting_k1_returns_sample():
    g = GraphConfig(horizon=3, label_horizon=3)
    model = TableModel(lambda a: np.full(3, 0.9), 3)
    seq, _ = select_action_shooting(model, np.zeros(1), PolicyConfig(K=1), g, np.random.default_rng(1))
    ref = sample_sequences(1, 3, "hold-constant", BOUND, np.random.default_rng(1))[0]
    np.testing.assert_array_equal(seq, ref)


def test_shooting_tie_goes_to_first_sample():
    g = GraphConfig(horizon=3, label_horizon=3)
    model = TableModel(lambda a: np.full(3, 0.5), 3)
    cands = np.random.default_rng(2).uniform(-BOUND, BOUND, (10, 3))
    seq, _ = select_action_shooting(model, np.zeros(1), PolicyConfig(K=10), g, None, candidates=cands)
    np.testing.assert_array_equal(seq, cands[0])


def test_value_shift_invariance(rng):
    g = GraphConfig(output_mode="value", loss_mode="mse", horizon=3, label_horizon=3, gamma=0.9)
    t = {}
    cands = rng.uniform(-BOUND, BOUND, (20, 3))
    for c in cands:
        t[tuple(c)] = rng.normal(size=3)
    a, _ = select_action_shooting(TableModel(lambda s: t[tuple(s)], 3), np.zeros(1), PolicyConfig(K=20), g, rng,
                                  candidates=cands)
    b, _ = select_action_shooting(TableModel(lambda s: t[tuple(s)] + 7.5, 3), np.zeros(1), PolicyConfig(K=20), g,
                                  rng, candidates=cands)
    np.testing.assert_array_equal(a, b)


def test_samplers():
    r = np.random.default_rng(3)
    hc = sample_sequences(50, 4, "hold-constant", BOUND, r)
    assert (hc == hc[:, :1]).all() and np.abs(hc).max() <= BOUND
    iid = sample_sequences(50, 4, "iid-uniform", BOUND, r)
    assert np.abs(iid).max() <= BOUND and (iid[:, 0] != iid[:, 1]).any()


def test_cem_single_iteration_all_elites():
    pc = PolicyConfig(K=32, sampler="cem", cem_iterations=1, cem_elite_frac=1.0)
    r = np.random.default_rng(4)
    res = cem_optimize(lambda s: -np.sum(s ** 2, axis=1), 3, pc, r)
    r2 = np.random.default_rng(4)
    samples = np.clip(0.3 * r2.standard_normal((32, 3)), -BOUND, BOUND)
    best = samples[np.argmax(-np.sum(samples ** 2, axis=1))]
    np.testing.assert_array_equal(res.sequence, best)
    np.testing.assert_allclose(res.means[1], samples.mean(axis=0))


def test_cem_converges_on_quadratic():
    target = np.array([0.2, -0.1, 0.3])
    pc = PolicyConfig(K=200, sampler="cem", cem_iterations=5, cem_elite_frac=0.1)
    res = cem_optimize(lambda s: -np.sum((s - target) ** 2, axis=1), 3, pc, np.random.default_rng(5))
    assert np.abs(res.means[-1] - target).max() < 0.05


def test_cem_never_worse_than_first_iteration():
    pc = PolicyConfig(K=16, sampler="cem", cem_iterations=4)
    for seed in range(100):
        r = np.random.default_rng(seed)
        w = r.normal(size=3)
        res = cem_optimize(lambda s: np.sin(3 * s @ w), 3, pc, r)
        assert res.J >= res.first_best


def test_cem_std_floor():
    pc = PolicyConfig(K=8, sampler="cem", cem_iterations=3, cem_elite_frac=0.125, cem_init_std=0.0)
    res = cem_optimize(lambda s: np.zeros(len(s)), 2, pc, np.random.default_rng(0))
    assert all((s >= 1e-3).all() for s in res.stds)


def test_select_action_cem_runs(rng):
    g = GraphConfig(horizon=3, label_horizon=3)
    m = tiny_model(g)
    seq, J = select_action(m, random_obs(m, 1, rng)[0], PolicyConfig(K=16, sampler="cem"), g, rng)
    assert seq.shape == (3,) and np.abs(seq).max() <= BOUND


def test_explore_identity():
    seq = np.array([0.1, 0.2])
    out = explore(seq, ScheduleState(0.0, 0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(out, seq)


def test_explore_eps_one_is_uniform():
    r = np.random.default_rng(6)
    firsts = np.array([explore(np.zeros(3), ScheduleState(1.0, 0.0), r, BOUND)[0] for _ in range(10_000)])
    assert stats.kstest(firsts, stats.uniform(loc=-BOUND, scale=2 * BOUND).cdf).pvalue > 0.01


def test_explore_deterministic_and_bounded():
    a = [explore(np.full(2, 0.5), ScheduleState(0.3, 0.5), np.random.default_rng(7), BOUND) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])
    r = np.random.default_rng(8)
    for _ in range(2000):
        assert abs(explore(np.full(2, BOUND), ScheduleState(0.2, 1.0), r, BOUND)[0]) <= BOUND


def test_schedule_monotone():
    pc = PolicyConfig(eps_start=0.5, eps_end=0.1, eps_decay_steps=100, noise_start=0.3, noise_end=0.0,
                      noise_decay_steps=50)
    vals = [schedule_at(pc, t) for t in range(0, 200, 5)]
    assert all(a.eps >= b.eps and a.noise >= b.noise for a, b in zip(vals, vals[1:]))
    assert vals[-1].eps == pytest.approx(0.1) and vals[-1].noise == 0.0


def test_policy_config_validation():
    with pytest.raises(ConfigError):
        PolicyConfig(K=0)
    with pytest.raises(ConfigError):
        PolicyConfig(cem_elite_frac=0.0)
    with pytest.raises(ConfigError):
        PolicyConfig(eps_start=0.1, eps_end=0.2)
    with pytest.raises(ConfigError):
        PolicyConfig(sampler="grid")


def _plan_time(m, K, H, obs, reps=5):
    acts = np.zeros((K, H))
    m.predict(obs, acts)
    t = time.perf_counter()
    for _ in range(reps):
        m.predict(obs, acts)
    return (time.perf_counter() - t) / reps


def test_planning_cost_roughly_linear():
    from gcg.graph.network import GraphModel, NetworkDims
    obs = np.zeros((1, 4, 32))
    m8 = GraphModel.create(NetworkDims(frame_shape=(32,)), GraphConfig(horizon=8, label_horizon=8))
    m16 = GraphModel.create(NetworkDims(frame_shape=(32,)), GraphConfig(horizon=16, label_horizon=16))
    base = _plan_time(m8, 256, 8, obs)
    # doubling K or H should cost between 1x and 4x (factor-of-2 tolerance around 2x)
    for t in (_plan_time(m8, 512, 8, obs), _plan_time(m16, 256, 16, obs)):
        assert 1.0 <= t / base <= 4.0
