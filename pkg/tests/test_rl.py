import copy

import numpy as np
import pytest

from planarquad import nn
from planarquad.controllers import scale_vd
from planarquad.rl import (TD3, BufferEmpty, BufferTooSmall, EpisodeBuffer,
                           OneStepDDPG, ReplayBuffer, TrainerConfig,
                           explore_action)
from test_nn import zero_net


def small_cfg(**kw):
    defaults = dict(hidden_width=32, batch_size=32, buffer_size=1000,
                    random_steps=10)
    defaults.update(kw)
    return TrainerConfig(**defaults)


def test_trainer_config_defaults():
    cfg = TrainerConfig()
    assert cfg.learning_rate == 1e-3
    assert cfg.discount == 0.99
    assert cfg.exploration_noise == 0.1
    assert cfg.total_steps == 300_000
    assert cfg.buffer_size == 300_000
    assert cfg.batch_size == 100
    assert cfg.random_steps == 10_000
    assert cfg.polyak_tau == 0.005
    assert cfg.target_policy_noise == 0.2
    assert cfg.policy_delay == 2
    assert cfg.one_step_train_iters == 100


class TestReplayBuffer:
    def test_ring_eviction(self):
        buf = ReplayBuffer(3, 2, 1)
        for k in range(5):
            buf.add(np.full(2, k), [k], float(k), np.full(2, k + 1), False)
        assert buf.size == 3
        # slots now hold records 3, 4, 2 (cursor wrapped twice)
        stored = sorted(buf.rew[:buf.size])
        assert stored == [2.0, 3.0, 4.0]

    def test_rejects_non_finite_reward(self):
        buf = ReplayBuffer(4, 2, 1)
        with pytest.raises(ValueError):
            buf.add(np.zeros(2), [0.0], np.nan, np.zeros(2), False)
        with pytest.raises(ValueError):
            buf.add(np.zeros(2), [0.0], np.inf, np.zeros(2), False)

    def test_sample_shapes_and_membership(self):
        buf = ReplayBuffer(10, 3, 2)
        for k in range(6):
            buf.add(np.full(3, k), np.full(2, -k), k, np.full(3, k + 1),
                    k % 2 == 0)
        obs, act, rew, nxt, term = buf.sample(20, np.random.default_rng(0))
        assert obs.shape == (20, 3) and act.shape == (20, 2)
        assert rew.shape == (20,) and term.shape == (20,)
        assert set(rew).issubset(set(range(6)))
        np.testing.assert_array_equal(nxt[:, 0], rew + 1)


class TestEpisodeBuffer:
    def test_ring_and_sample(self):
        buf = EpisodeBuffer(2, 3)
        buf.add(1.0, np.zeros(3), 100.0)
        buf.add(2.0, np.ones(3), 200.0)
        buf.add(3.0, np.full(3, 2.0), 300.0)
        assert buf.size == 2
        assert sorted(buf.ret) == [200.0, 300.0]
        v, a, r = buf.sample(8, np.random.default_rng(1))
        assert v.shape == (8,) and a.shape == (8, 3)
        assert set(r).issubset({200.0, 300.0})


class TestExploreAction:
    def test_warmup_is_uniform_and_ignores_actor(self):
        cfg = small_cfg(random_steps=100)
        rng = np.random.default_rng(2)
        actor = nn.init_mlp([4, 8, 3], rng)
        draws = np.array([explore_action(actor, np.ones(4), cfg, 0, rng)
                          for _ in range(4000)])
        assert np.all(np.abs(draws) <= 1.0)
        assert abs(draws.mean()) < 0.02
        # variance of U(-1, 1) is 1/3
        assert abs(draws.var() - 1.0 / 3.0) < 0.01

    def test_zero_noise_returns_actor_output(self):
        cfg = small_cfg(exploration_noise=0.0, random_steps=0)
        rng = np.random.default_rng(3)
        actor = nn.init_mlp([4, 8, 3], rng)
        x = rng.normal(size=4)
        np.testing.assert_array_equal(
            explore_action(actor, x, cfg, 50, rng), nn.forward(actor, x))

    def test_noisy_actions_clipped(self):
        cfg = small_cfg(exploration_noise=5.0, random_steps=0)
        rng = np.random.default_rng(4)
        actor = nn.init_mlp([4, 8, 3], rng)
        for _ in range(100):
            a = explore_action(actor, rng.normal(size=4), cfg, 50, rng)
            assert np.all(np.abs(a) <= 1.0)


def constant_critic(obs_dim, act_dim, value, hidden=32):
    net = zero_net([obs_dim + act_dim, hidden, hidden, 1], "identity")
    net.biases[-1][0] = value
    return net


class TestTD3Target:
    def test_terminal_masks_bootstrap(self):
        cfg = small_cfg(target_policy_noise=0.0)
        agent = TD3(2, 1, cfg, np.random.default_rng(5))
        agent.target_critic1 = constant_critic(2, 1, 8.0)
        agent.target_critic2 = constant_critic(2, 1, 12.0)
        r = np.array([1.0, -0.5])
        nxt = np.zeros((2, 2))
        y = agent.target(r, nxt, np.array([1.0, 1.0]))
        np.testing.assert_array_equal(y, r)

    def test_bootstrap_arithmetic_and_min(self):
        cfg = small_cfg(target_policy_noise=0.0)
        agent = TD3(2, 1, cfg, np.random.default_rng(6))
        agent.target_critic1 = constant_critic(2, 1, 8.0)
        agent.target_critic2 = constant_critic(2, 1, 12.0)
        y = agent.target(np.array([1.0]), np.zeros((1, 2)), np.array([0.0]))
        assert y[0] == pytest.approx(1.0 + 0.99 * 8.0, rel=1e-12)  # 8.92
        # min of the twins is symmetric under swapping them
        agent.target_critic1, agent.target_critic2 = (agent.target_critic2,
                                                      agent.target_critic1)
        y2 = agent.target(np.array([1.0]), np.zeros((1, 2)), np.array([0.0]))
        assert y2[0] == y[0]

    def test_target_noise_is_clipped(self):
        cfg = small_cfg(target_policy_noise=10.0, target_noise_clip=0.5)
        agent = TD3(2, 1, cfg, np.random.default_rng(7))
        # critic returns the action itself so the noise is observable
        lin = zero_net([3, 1], "identity")
        lin.weights[0][0, 2] = 1.0
        agent.target_critic1 = lin
        agent.target_critic2 = lin.copy()
        agent.target_actor = zero_net([2, 8, 1])
        rng = np.random.default_rng(8)
        y = agent.target(np.zeros(200), np.zeros((200, 2)), np.zeros(200), rng)
        # a' = clip(0 + clipped noise), so |Q'| <= 0.5 and y = 0.99 * Q'
        assert np.all(np.abs(y) <= 0.99 * 0.5 + 1e-12)
        assert np.abs(y).max() > 0.99 * 0.45  # the clip is actually active


class TestTD3Update:
    def fill_buffer(self, agent, rng, n=200):
        for _ in range(n):
            obs = rng.normal(size=agent.obs_dim)
            act = rng.uniform(-1, 1, size=agent.act_dim)
            agent.buffer.add(obs, act, rng.normal(), obs, False)

    def test_buffer_too_small(self):
        agent = TD3(2, 1, small_cfg(), np.random.default_rng(9))
        with pytest.raises(BufferTooSmall):
            agent.update(np.random.default_rng(0))

    def test_policy_delay_counts(self):
        rng = np.random.default_rng(10)
        agent = TD3(2, 1, small_cfg(policy_delay=2), rng)
        self.fill_buffer(agent, rng)
        for _ in range(10):
            agent.update(rng)
        assert agent.update_calls == 10
        assert agent.actor_updates == 5

    def test_critic_loss_decreases_on_frozen_buffer(self):
        rng = np.random.default_rng(11)
        agent = TD3(3, 2, small_cfg(policy_delay=10 ** 9), rng)
        # deterministic targets: terminal transitions, fixed rewards
        for k in range(64):
            obs = rng.normal(size=3)
            agent.buffer.add(obs, rng.uniform(-1, 1, 2),
                             np.sin(k), obs, True)
        first = np.mean([agent.update(rng) for _ in range(10)])
        for _ in range(1500):
            agent.update(rng)
        last = np.mean([agent.update(rng) for _ in range(10)])
        assert last < 0.3 * first

    def test_bandit_actor_converges(self):
        # one state, reward -(a - 0.3)^2, terminal: optimum a* = 0.3
        rng = np.random.default_rng(12)
        cfg = small_cfg(batch_size=64, target_policy_noise=0.0,
                        policy_delay=2)
        agent = TD3(1, 1, cfg, rng)
        obs = np.zeros(1)
        for _ in range(2000):
            a = rng.uniform(-1, 1)
            agent.buffer.add(obs, [a], -(a - 0.3) ** 2, obs, True)
        for _ in range(3000):
            agent.update(rng)
        assert abs(agent.act(obs)[0] - 0.3) < 0.05

    def test_update_deterministic(self):
        rng = np.random.default_rng(13)
        agent = TD3(2, 1, small_cfg(), rng)
        self.fill_buffer(agent, rng, 64)
        twin = copy.deepcopy(agent)
        r1, r2 = np.random.default_rng(99), np.random.default_rng(99)
        for _ in range(5):
            agent.update(r1)
            twin.update(r2)
        for a, b in zip(agent.actor.weights, twin.actor.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(agent.critic1.weights, twin.critic1.weights):
            np.testing.assert_array_equal(a, b)


class TestOneStepDDPG:
    def test_empty_buffer_raises(self):
        agent = OneStepDDPG(3, small_cfg(), np.random.default_rng(14))
        with pytest.raises(BufferEmpty):
            agent.train(np.random.default_rng(0))

    def test_single_record_regression(self):
        rng = np.random.default_rng(15)
        agent = OneStepDDPG(3, small_cfg(), rng)
        action = np.array([0.2, -0.4, 0.6])
        agent.buffer.add(2.0, action, 500.0)
        for _ in range(20):
            agent.train(rng)
        x = np.concatenate([[scale_vd(2.0)], action])
        pred = nn.forward(agent.critic, x)[0] * agent.return_scale
        assert pred == pytest.approx(500.0, abs=1.0)

    def test_recovers_affine_optimum(self):
        # synthetic return peaked at a*(v) = 0.4 * scale_vd(v)
        rng = np.random.default_rng(16)
        cfg = small_cfg(batch_size=100)
        agent = OneStepDDPG(2, cfg, rng)
        for _ in range(2000):
            v = rng.uniform(1, 5)
            a = rng.uniform(-1, 1, 2)
            ret = 800.0 - 500.0 * np.sum((a - 0.4 * scale_vd(v)) ** 2)
            agent.buffer.add(v, a, ret)
        for _ in range(60):
            agent.train(rng)
        for v in (1.0, 3.0, 5.0):
            a = agent.act(v)
            np.testing.assert_allclose(a, 0.4 * scale_vd(v), atol=0.1)

    def test_train_deterministic(self):
        rng = np.random.default_rng(17)
        agent = OneStepDDPG(2, small_cfg(), rng)
        for k in range(50):
            agent.buffer.add(1 + 0.08 * k, rng.uniform(-1, 1, 2),
                             rng.uniform(0, 900))
        twin = copy.deepcopy(agent)
        agent.train(np.random.default_rng(7))
        twin.train(np.random.default_rng(7))
        for a, b in zip(agent.actor.weights, twin.actor.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(agent.critic.weights, twin.critic.weights):
            np.testing.assert_array_equal(a, b)

    def test_critic_phase_independent_of_actor(self):
        # scrambling the actor must not change the critic's update at all,
        # i.e. the critic phase runs strictly before (and apart from) the
        # actor phase
        rng = np.random.default_rng(18)
        agent = OneStepDDPG(2, small_cfg(), rng)
        for k in range(50):
            agent.buffer.add(1 + 0.08 * k, rng.uniform(-1, 1, 2),
                             rng.uniform(0, 900))
        twin = copy.deepcopy(agent)
        for w in twin.actor.weights:
            w += rng.normal(size=w.shape)
        agent.train(np.random.default_rng(7))
        twin.train(np.random.default_rng(7))
        for a, b in zip(agent.critic.weights, twin.critic.weights):
            np.testing.assert_array_equal(a, b)
