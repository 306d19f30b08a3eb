import numpy as np
import pytest

from planarquad.dynamics import SimState
from planarquad.env import (EpisodeConfig, InvalidDesiredVelocity,
                            LocomotionEnv, check_early_stop,
                            nominal_stance_angles, reward)
from planarquad.kinematics import foot_fk


class TestReward:
    def test_exact_tracking(self):
        assert reward(2.0, 2.0) == 1.0

    def test_standing_still(self):
        assert reward(0.0, 3.0) == 0.0

    def test_overshoot_penalized_symmetrically(self):
        assert reward(3.0, 2.0) == pytest.approx(0.5)
        assert reward(1.0, 2.0) == pytest.approx(0.5)

    def test_going_backwards(self):
        assert reward(-1.0, 2.0) == pytest.approx(-0.5)

    def test_rejects_non_positive_vd(self):
        with pytest.raises(InvalidDesiredVelocity):
            reward(1.0, 0.0)
        with pytest.raises(InvalidDesiredVelocity):
            reward(1.0, -2.0)


class TestEarlyStop:
    def make_state(self, height, pitch):
        q = np.zeros(11)
        q[1], q[2] = height, pitch
        return SimState(q, np.zeros(11))

    def test_thresholds(self):
        cfg = EpisodeConfig()
        assert not check_early_stop(self.make_state(0.45, 0.0), cfg)
        assert check_early_stop(self.make_state(0.45, 1.001), cfg)
        assert check_early_stop(self.make_state(0.45, -1.001), cfg)
        assert check_early_stop(self.make_state(0.299, 0.0), cfg)
        # boundary values do not trip (strict comparisons)
        assert not check_early_stop(self.make_state(0.3, 1.0), cfg)

    def test_disabled(self):
        cfg = EpisodeConfig(early_stop_enabled=False)
        assert not check_early_stop(self.make_state(0.0, 3.0), cfg)


def test_nominal_stance_angles_reach_target(model):
    for h in (0.35, 0.45, 0.55):
        qh, qk = nominal_stance_angles(model, h)
        x, y = foot_fk(model, qh, qk)
        assert x == pytest.approx(0.0, abs=1e-12)
        assert y == pytest.approx(-h, rel=1e-12)


class TestReset:
    def test_observation_dimension_and_contacts(self):
        env = LocomotionEnv("direct")
        obs = env.reset(np.random.default_rng(0), v_d=2.0)
        v = obs.to_vector()
        assert v.shape == (26,)
        assert obs.v_d == 2.0
        # dropped onto the ground: at least one foot in contact, body upright
        assert obs.contact_flags.any()
        assert obs.pitch == 0.0
        assert obs.com_height == pytest.approx(0.45, abs=0.03)

    def test_deterministic_given_seed(self):
        env = LocomotionEnv("direct")
        a = env.reset(np.random.default_rng(42)).to_vector()
        b = LocomotionEnv("direct").reset(np.random.default_rng(42)).to_vector()
        np.testing.assert_array_equal(a, b)

    def test_perturbation_varies_with_seed(self):
        env = LocomotionEnv("direct")
        a = env.reset(np.random.default_rng(1), v_d=2.0).to_vector()
        b = env.reset(np.random.default_rng(2), v_d=2.0).to_vector()
        assert not np.array_equal(a, b)

    def test_vd_sampling_statistics(self):
        env = LocomotionEnv("direct",
                            episode=EpisodeConfig(joint_perturbation=0.0))
        rng = np.random.default_rng(3)
        draws = np.array([env.reset(rng).v_d for _ in range(10_000)])
        assert draws.min() >= 1.0 and draws.max() <= 5.0
        assert abs(draws.mean() - 3.0) < 0.05
        # variance of U(1, 5) is 16/12
        assert abs(draws.var() - 16.0 / 12.0) < 0.05

    def test_rejects_bad_vd(self):
        env = LocomotionEnv("direct")
        with pytest.raises(InvalidDesiredVelocity):
            env.reset(np.random.default_rng(0), v_d=-1.0)

    def test_unknown_policy_kind(self):
        with pytest.raises(ValueError):
            LocomotionEnv("mpc")


class TestStep:
    def test_step_before_reset(self):
        env = LocomotionEnv("direct")
        with pytest.raises(RuntimeError):
            env.step(np.zeros(8))

    def test_action_dims(self):
        assert LocomotionEnv("direct").action_dim == 8
        assert LocomotionEnv("structured").action_dim == 20
        assert LocomotionEnv("highly").action_dim == 18

    def test_wrong_action_length(self):
        env = LocomotionEnv("direct")
        env.reset(np.random.default_rng(0))
        with pytest.raises(ValueError):
            env.step(np.zeros(7))

    def test_info_fields(self):
        env = LocomotionEnv("direct")
        env.reset(np.random.default_rng(0), v_d=2.0)
        res = env.step(np.zeros(8))
        for key in ("com_vx", "com_height", "pitch", "power", "torques",
                    "contact_flags", "time", "q", "qdot"):
            assert key in res.info
        assert res.info["time"] == pytest.approx(0.01)
        assert res.info["torques"].shape == (8,)
        assert np.all(np.abs(res.info["torques"]) <= 100.0)

    def test_zero_torque_sag_terminates(self):
        # unactuated, the robot collapses and trips the height limit
        env = LocomotionEnv("direct")
        env.reset(np.random.default_rng(4), v_d=2.0)
        terminated = False
        for _ in range(1000):
            res = env.step(np.zeros(8))
            if res.terminated:
                terminated = True
                break
        assert terminated

    def test_truncation_at_max_steps(self):
        env = LocomotionEnv("direct",
                            episode=EpisodeConfig(max_steps=5,
                                                  early_stop_enabled=False))
        env.reset(np.random.default_rng(5), v_d=2.0)
        for k in range(5):
            res = env.step(np.zeros(8))
        assert res.truncated and not res.terminated

    def test_no_early_stop_runs_full_episode(self):
        env = LocomotionEnv("direct",
                            episode=EpisodeConfig(max_steps=200,
                                                  early_stop_enabled=False))
        env.reset(np.random.default_rng(6), v_d=2.0)
        steps = 0
        while True:
            res = env.step(np.zeros(8))
            steps += 1
            assert not res.terminated
            if res.truncated:
                break
        assert steps == 200

    def test_episode_never_exceeds_max_steps(self):
        env = LocomotionEnv("direct", episode=EpisodeConfig(max_steps=50))
        rng = np.random.default_rng(7)
        for _ in range(5):
            env.reset(rng)
            steps = 0
            while True:
                res = env.step(rng.uniform(-1, 1, 8))
                steps += 1
                if res.terminated or res.truncated:
                    break
            assert steps <= 50

    def test_reward_matches_info_velocity(self):
        env = LocomotionEnv("direct")
        env.reset(np.random.default_rng(8), v_d=2.0)
        res = env.step(np.zeros(8))
        assert res.reward == pytest.approx(
            reward(res.info["com_vx"], 2.0), rel=1e-12)

    def test_actions_clipped_to_box(self):
        env = LocomotionEnv("direct")
        env.reset(np.random.default_rng(9), v_d=2.0)
        res = env.step(np.full(8, 10.0))
        np.testing.assert_allclose(res.info["torques"], 100.0)


class TestPolicyKinds:
    @pytest.mark.parametrize("kind", ["direct", "structured", "highly"])
    def test_full_episode_runs(self, kind):
        env = LocomotionEnv(kind, episode=EpisodeConfig(max_steps=100))
        rng = np.random.default_rng(10)
        env.reset(rng, v_d=2.0)
        action = np.zeros(env.action_dim)
        for _ in range(100):
            res = env.step(action)
            assert np.isfinite(res.reward)
            assert np.all(np.isfinite(res.observation.to_vector()))
            if res.terminated or res.truncated:
                break

    def test_highly_stands_or_trots_without_falling(self):
        # the mid-box scaling action must keep the trot controller upright
        env = LocomotionEnv("highly", episode=EpisodeConfig(max_steps=300))
        env.reset(np.random.default_rng(11), v_d=1.0)
        action = np.zeros(18)
        for _ in range(300):
            res = env.step(action)
            assert not res.terminated
            if res.truncated:
                break

    def test_determinism_across_episodes(self):
        def rollout(kind):
            env = LocomotionEnv(kind, episode=EpisodeConfig(max_steps=50))
            rng = np.random.default_rng(12)
            env.reset(rng, v_d=2.0)
            rews = []
            act_rng = np.random.default_rng(13)
            for _ in range(50):
                res = env.step(act_rng.uniform(-1, 1, env.action_dim))
                rews.append(res.reward)
                if res.terminated or res.truncated:
                    break
            return np.array(rews)

        for kind in ("direct", "structured", "highly"):
            np.testing.assert_array_equal(rollout(kind), rollout(kind))
