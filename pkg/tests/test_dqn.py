"""Value-learner mechanics: targets, exploration, freezing, determinism."""
import math

import numpy as np
import pytest

from skillarena.actions import SkillId
from skillarena.arena import Arena, ArenaConfig
from skillarena.dqn import (
    DqnAgent,
    DqnConfig,
    EpsilonGreedySource,
    act_epsilon_greedy,
    frozen_from_arrays,
    mean_ci95,
    td_targets,
    train_agents,
    train_skill,
    warm_start_agent,
)
from skillarena.errors import NumericalError, UsageError
from skillarena.nets import Mlp
from skillarena.seeding import make_rng

TOY = dict(batch_size=16, warmup=16, train_freq=4, target_update=64,
           eval_every=100, eval_episodes=1)


def test_td_targets_done_suppresses_bootstrap():
    net = Mlp([2, 3], np.random.default_rng(0))
    rewards = np.array([-6.28])
    dones = np.array([True])
    y = td_targets(rewards, np.ones((1, 2)), dones, net, gamma=0.99)
    assert y[0] == pytest.approx(-6.28)


def test_td_targets_gamma_zero_is_reward():
    net = Mlp([2, 3], np.random.default_rng(0))
    rewards = np.array([1.0, -2.0, 0.5])
    dones = np.array([False, False, True])
    y = td_targets(rewards, np.random.default_rng(1).normal(size=(3, 2)), dones, net, 0.0)
    np.testing.assert_allclose(y, rewards)


def test_td_targets_two_state_chain_fixed_point():
    """s0 -> s1 (reward 1) -> terminal (reward 2); gamma = 0.99."""
    net = Mlp([2, 1])  # one-hot states, linear Q-table in the weights
    s0, s1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    obs = np.stack([s0, s1])
    rewards = np.array([1.0, 2.0])
    next_obs = np.stack([s1, s1])
    dones = np.array([False, True])
    for _ in range(10):
        y = td_targets(rewards, next_obs, dones, net, gamma=0.99)
        net.params[0][0, 0] = y[0]
        net.params[0][1, 0] = y[1]
    assert net.forward(s1)[0, 0] == pytest.approx(2.0)
    assert net.forward(s0)[0, 0] == pytest.approx(1.0 + 0.99 * 2.0)


def test_epsilon_one_is_empirically_uniform():
    net = Mlp([2, 3], np.random.default_rng(0))
    rng = np.random.default_rng(123)
    counts = np.zeros(3)
    n = 10_000
    for _ in range(n):
        counts[act_epsilon_greedy(net, np.zeros(2), 1.0, rng)] += 1
    expected = n / 3.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 9.21  # chi-square critical value, 2 dof, p = 0.01


def test_epsilon_zero_is_deterministic_argmax():
    net = Mlp([2, 4], np.random.default_rng(3))
    obs = np.array([0.4, -1.2])
    expected = int(np.argmax(net.forward(obs)[0]))
    rng = np.random.default_rng(0)
    assert all(act_epsilon_greedy(net, obs, 0.0, rng) == expected for _ in range(100))


def test_greedy_ties_break_to_lowest_index():
    net = Mlp([2, 5])  # all-zero parameters mean all-equal action values
    rng = np.random.default_rng(0)
    assert act_epsilon_greedy(net, np.ones(2), 0.0, rng) == 0


def test_epsilon_schedule_endpoints():
    cfg = DqnConfig(budget=10_000, **TOY)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(500) == pytest.approx(0.525)
    assert cfg.epsilon(1_000) == pytest.approx(0.05)
    assert cfg.epsilon(9_999) == pytest.approx(0.05)


def test_config_validation_and_capacity_rule():
    with pytest.raises(UsageError):
        DqnConfig(budget=0)
    with pytest.raises(UsageError):
        DqnConfig(budget=100, gamma=1.5)
    with pytest.raises(UsageError):
        DqnConfig(budget=100, eps_start=2.0)
    with pytest.raises(UsageError):
        DqnConfig(budget=100, batch_size=64, warmup=32)
    assert DqnConfig(budget=30_000).capacity == 10_000
    assert DqnConfig(budget=30_000, buffer_capacity=500).capacity == 500
    # tiny budgets still hold at least one batch
    assert DqnConfig(budget=300, **TOY).capacity == 100


def synthetic_transitions(agent, n, rng, reward=1.0):
    dim = agent.net.sizes[0]
    for _ in range(n):
        obs = rng.normal(size=dim)
        agent.observe(obs, int(rng.integers(agent.net.sizes[-1])),
                      reward, rng.normal(size=dim), False)


def test_target_updates_only_at_boundaries():
    cfg = DqnConfig(budget=1_000, **TOY)
    agent = DqnAgent(SkillId.LOCK, cfg, make_rng(0))
    rng = np.random.default_rng(5)
    previous = [p.copy() for p in agent.target.params]
    for k in range(1, 200):
        synthetic_transitions(agent, 1, rng)
        changed = any(
            not np.array_equal(a, b) for a, b in zip(agent.target.params, previous)
        )
        if k % cfg.target_update == 0:
            for a, b in zip(agent.target.params, agent.net.params):
                np.testing.assert_array_equal(a, b)
        else:
            assert not changed
        previous = [p.copy() for p in agent.target.params]
    assert agent.grad_steps > 0


def test_online_net_learns_while_target_lags():
    cfg = DqnConfig(budget=1_000, **TOY)
    agent = DqnAgent(SkillId.LOCK, cfg, make_rng(1))
    rng = np.random.default_rng(6)
    synthetic_transitions(agent, 63, rng)
    target_before = [p.copy() for p in agent.target.params]
    online_before = [p.copy() for p in agent.net.params]
    synthetic_transitions(agent, 1, rng)  # 64th transition: grad step + update
    assert any(
        not np.array_equal(a, b) for a, b in zip(agent.net.params, online_before)
    )
    for a, b in zip(agent.target.params, agent.net.params):
        np.testing.assert_array_equal(a, b)
    del target_before


def test_nan_reward_aborts_with_numerical_error():
    cfg = DqnConfig(budget=1_000, **TOY)
    agent = DqnAgent(SkillId.LOCK, cfg, make_rng(2))
    rng = np.random.default_rng(7)
    synthetic_transitions(agent, 15, rng)
    agent.buffer.add(np.zeros(2), 0, math.nan, np.zeros(2), False)
    agent.transitions += 1
    with pytest.raises(NumericalError):
        agent.train_step()


def test_export_and_frozen_roundtrip():
    cfg = DqnConfig(budget=1_000, **TOY)
    agent = DqnAgent(SkillId.DODGE, cfg, make_rng(3))
    rng = np.random.default_rng(8)
    for _ in range(30):
        agent.stats.update(rng.normal(size=7))
    synthetic_transitions(agent, 40, rng)
    arrays = agent.export_arrays()
    frozen = frozen_from_arrays(agent.checkpoint_meta(), arrays)
    x = rng.normal(size=7)
    np.testing.assert_array_equal(frozen.net.forward(x), agent.net.forward(x))
    np.testing.assert_array_equal(frozen.stats.mean, agent.stats.mean)
    assert frozen.stats.count == agent.stats.count
    counters = arrays["counters"]
    assert counters.tolist() == [agent.steps, agent.transitions,
                                 agent.grad_steps, agent.optimizer.t]


def test_warm_start_carries_params_but_resets_optimizer():
    cfg = DqnConfig(budget=1_000, **TOY)
    agent = DqnAgent(SkillId.HA, cfg, make_rng(4))
    rng = np.random.default_rng(9)
    for _ in range(20):
        agent.stats.update(rng.normal(size=11))
    synthetic_transitions(agent, 50, rng)
    arrays = agent.export_arrays()
    warm = warm_start_agent(SkillId.HA, cfg, agent.checkpoint_meta(), arrays, make_rng(5))
    for a, b in zip(warm.net.params, agent.net.params):
        np.testing.assert_array_equal(a, b)
    assert warm.stats.count == agent.stats.count
    assert warm.optimizer.t == 0
    assert warm.buffer.size == 0
    assert warm.steps == 0
    with pytest.raises(UsageError):
        warm_start_agent(SkillId.LOCK, cfg, agent.checkpoint_meta(), arrays, make_rng(5))


def test_mean_ci95():
    mean, half = mean_ci95([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert half == pytest.approx(1.96 * 1.0 / math.sqrt(3))
    assert mean_ci95([4.0]) == (4.0, 0.0)
    empty_mean, empty_half = mean_ci95([])
    assert math.isnan(empty_mean) and math.isnan(empty_half)


def short_train(seed_keys, frozen=None, budget=150):
    arena = Arena(ArenaConfig(spawn_mode="mid", seed=0))
    cfg = DqnConfig(budget=budget, **TOY)
    agent, result = train_skill(
        SkillId.CAM, arena, cfg, frozen or {}, horizon=16, seed_keys=seed_keys
    )
    return agent, result


def test_train_skill_budget_and_marks():
    agent, result = short_train((12, 0))
    assert agent.steps == 150  # the stop callback truncates exactly on budget
    marks = [row["step"] for row in result.metrics[SkillId.CAM]]
    assert marks == [100]
    assert result.episodes > 0


def test_train_skill_is_deterministic():
    a, ra = short_train((12, 0))
    b, rb = short_train((12, 0))
    for x, y in zip(a.export_arrays().values(), b.export_arrays().values()):
        np.testing.assert_array_equal(x, y)
    assert ra.metrics == rb.metrics and ra.episodes == rb.episodes


def test_frozen_skills_never_mutate_during_training():
    donor = DqnAgent(SkillId.CAM, DqnConfig(budget=200, **TOY), make_rng(6))
    rng = np.random.default_rng(10)
    for _ in range(25):
        donor.stats.update(rng.normal(size=7))
    frozen = frozen_from_arrays(donor.checkpoint_meta(), donor.export_arrays())
    params_before = [p.copy() for p in frozen.net.params]
    stats_before = {k: v.copy() for k, v in frozen.stats.state_dict().items()}

    arena = Arena(ArenaConfig(spawn_mode="mid", seed=0))
    cfg = DqnConfig(budget=150, **TOY)
    learner = DqnAgent(SkillId.LOCK, cfg, make_rng(7))
    train_agents({SkillId.LOCK: learner}, {SkillId.CAM: frozen}, arena,
                 SkillId.LOCK, horizon=16, budget=150, seed_keys=(13, 1))
    for a, b in zip(frozen.net.params, params_before):
        np.testing.assert_array_equal(a, b)
    for key, value in frozen.stats.state_dict().items():
        np.testing.assert_array_equal(value, stats_before[key])


def test_two_learners_share_episodes():
    arena = Arena(ArenaConfig(spawn_mode="mid", seed=0))
    cfg = DqnConfig(budget=400, **TOY)
    dodge = DqnAgent(SkillId.DODGE, cfg, make_rng(8))
    ha = DqnAgent(SkillId.HA, cfg, make_rng(9))
    result = train_agents(
        {SkillId.DODGE: dodge, SkillId.HA: ha}, {}, arena, SkillId.HA,
        horizon=32, budget=400, seed_keys=(14, 2),
    )
    assert max(dodge.steps, ha.steps) == 400  # either learner may cap the run
    assert set(result.metrics) == {SkillId.DODGE, SkillId.HA}
    assert dodge.transitions > 0 and ha.transitions > 0


def test_driver_must_be_a_learner():
    arena = Arena(ArenaConfig(seed=0))
    cfg = DqnConfig(budget=100, **TOY)
    agent = DqnAgent(SkillId.CAM, cfg, make_rng(10))
    with pytest.raises(UsageError):
        train_agents({SkillId.CAM: agent}, {}, arena, SkillId.HA,
                     horizon=8, budget=100, seed_keys=(15, 3))


def test_epsilon_greedy_source_matches_free_function():
    net = Mlp([2, 3], np.random.default_rng(11))
    obs = np.array([0.2, -0.4])
    src = EpsilonGreedySource(net, 0.3, make_rng(16))
    reference_rng = make_rng(16)
    expected = [act_epsilon_greedy(net, obs, 0.3, reference_rng) for _ in range(50)]
    assert [src.act(obs) for _ in range(50)] == expected
