"""Trainers: TD3 (twin critics, target smoothing, delayed actor) and the
episodic one-step DDPG used by the highly structured policy.

Both operate in the normalized action box [-1, 1]^d; the environment owns
the mapping to physical quantities.  All sampling draws from an injected
numpy Generator so training is reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .controllers import scale_vd


class BufferTooSmall(RuntimeError):
    pass


class BufferEmpty(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    discount: float = 0.99
    exploration_noise: float = 0.1
    total_steps: int = 300_000
    buffer_size: int = 300_000
    batch_size: int = 100
    random_steps: int = 10_000
    polyak_tau: float = 0.005
    target_policy_noise: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    one_step_train_iters: int = 100
    one_step_batch: int = 512
    critic_weight_decay: float = 3e-4
    hidden_width: int = 256
    highly_hidden_width: int = 8


class ReplayBuffer:
    """Fixed-capacity ring buffer of (s, a, r, s', terminal) transitions."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.terminal = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def add(self, obs, act, rew, next_obs, terminal: bool) -> None:
        if not np.isfinite(rew):
            raise ValueError("reward must be finite")
        i = self.cursor
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.terminal[i] = float(terminal)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.terminal[idx])


class EpisodeBuffer:
    """Ring of whole-episode records (v_d, action, cumulative reward)."""

    def __init__(self, capacity: int, act_dim: int):
        self.capacity = capacity
        self.v_d = np.zeros(capacity)
        self.act = np.zeros((capacity, act_dim))
        self.ret = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def add(self, v_d: float, action, cumulative_reward: float) -> None:
        i = self.cursor
        self.v_d[i] = v_d
        self.act[i] = action
        self.ret[i] = cumulative_reward
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return self.v_d[idx], self.act[idx], self.ret[idx]


def explore_action(actor: nn.MlpParams, state_vec: np.ndarray,
                   cfg: TrainerConfig, step_index: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform over the box during warmup, then actor + Gaussian noise.

    Everything is in the normalized box, so half-range is 1 per dimension
    and the noise std is exactly cfg.exploration_noise.
    """
    dim = actor.output_width
    if step_index < cfg.random_steps:
        return rng.uniform(-1.0, 1.0, size=dim)
    a = nn.forward(actor, state_vec)
    if cfg.exploration_noise > 0.0:
        a = a + rng.normal(0.0, cfg.exploration_noise, size=dim)
    return np.clip(a, -1.0, 1.0)


class TD3:
    """Twin delayed deterministic policy gradient over a transition buffer."""

    def __init__(self, obs_dim: int, act_dim: int, cfg: TrainerConfig,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        w = cfg.hidden_width
        self.actor = nn.init_mlp([obs_dim, w, w, act_dim], rng,
                                 "tanh", final_scale=0.1)
        self.critic1 = nn.init_mlp([obs_dim + act_dim, w, w, 1], rng, "identity")
        self.critic2 = nn.init_mlp([obs_dim + act_dim, w, w, 1], rng, "identity")
        self.target_actor = self.actor.copy()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        lr = cfg.learning_rate
        self.opt_actor = nn.AdamState.for_net(self.actor, lr)
        self.opt_critic1 = nn.AdamState.for_net(self.critic1, lr)
        self.opt_critic2 = nn.AdamState.for_net(self.critic2, lr)
        self.buffer = ReplayBuffer(cfg.buffer_size, obs_dim, act_dim)
        self.update_calls = 0
        self.actor_updates = 0

    def act(self, obs_vec: np.ndarray) -> np.ndarray:
        return nn.forward(self.actor, obs_vec)

    def target(self, r: np.ndarray, next_obs: np.ndarray,
               terminal: np.ndarray, rng: np.random.Generator | None = None
               ) -> np.ndarray:
        """Eq. target y = r + gamma * min(Q'1, Q'2)(s', a' + clipped noise)."""
        cfg = self.cfg
        a2 = nn.forward(self.target_actor, next_obs)
        if rng is not None and cfg.target_policy_noise > 0.0:
            noise = np.clip(
                rng.normal(0.0, cfg.target_policy_noise, size=a2.shape),
                -cfg.target_noise_clip, cfg.target_noise_clip)
            a2 = np.clip(a2 + noise, -1.0, 1.0)
        sa = np.concatenate([next_obs, a2], axis=1)
        q1 = nn.forward(self.target_critic1, sa)[:, 0]
        q2 = nn.forward(self.target_critic2, sa)[:, 0]
        return r + cfg.discount * (1.0 - terminal) * np.minimum(q1, q2)

    def update(self, rng: np.random.Generator) -> float:
        """One gradient step; actor/targets every cfg.policy_delay calls.

        Returns the mean twin-critic loss on the sampled batch.
        """
        cfg = self.cfg
        if self.buffer.size < cfg.batch_size:
            raise BufferTooSmall(
                f"buffer has {self.buffer.size} < batch {cfg.batch_size}")
        obs, act, rew, next_obs, term = self.buffer.sample(cfg.batch_size, rng)
        y = self.target(rew, next_obs, term, rng)

        sa = np.concatenate([obs, act], axis=1)
        n = cfg.batch_size
        loss = 0.0
        for critic, opt in ((self.critic1, self.opt_critic1),
                            (self.critic2, self.opt_critic2)):
            q, acts = nn.forward_cached(critic, sa)
            err = q[:, 0] - y
            loss += float(np.mean(err ** 2))
            gw, gb, _ = nn.backward_from_acts(critic, acts,
                                              (2.0 / n) * err[:, None])
            nn.adam_step(opt, critic, gw, gb)

        self.update_calls += 1
        if self.update_calls % cfg.policy_delay == 0:
            # ascend Q1(s, pi(s)) through the actor
            a_pi, actor_acts = nn.forward_cached(self.actor, obs)
            sa_pi = np.concatenate([obs, a_pi], axis=1)
            _, critic_acts = nn.forward_cached(self.critic1, sa_pi)
            _, _, g_in = nn.backward_from_acts(
                self.critic1, critic_acts, np.full((n, 1), -1.0 / n))
            g_action = g_in[:, self.obs_dim:]
            gw, gb, _ = nn.backward_from_acts(self.actor, actor_acts, g_action)
            nn.adam_step(self.opt_actor, self.actor, gw, gb)
            self.actor_updates += 1
            tau = cfg.polyak_tau
            nn.polyak_update(self.target_actor, self.actor, tau)
            nn.polyak_update(self.target_critic1, self.critic1, tau)
            nn.polyak_update(self.target_critic2, self.critic2, tau)
        return loss / 2.0


class OneStepDDPG:
    """Episodic trainer: undiscounted return regression + policy gradient.

    The critic maps (v_d, action) to the episode return; no bootstrapping,
    no target networks.  Called once per finished episode.
    """

    def __init__(self, act_dim: int, cfg: TrainerConfig,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.act_dim = act_dim
        w = cfg.highly_hidden_width
        self.actor = nn.init_mlp([1, w, act_dim], rng, "tanh", final_scale=0.1)
        self.critic = nn.init_mlp([1 + act_dim, 64, 64, 1], rng, "identity")
        lr = cfg.learning_rate
        self.opt_actor = nn.AdamState.for_net(self.actor, lr)
        self.opt_critic = nn.AdamState.for_net(self.critic, lr)
        self.buffer = EpisodeBuffer(cfg.buffer_size, act_dim)
        self.return_scale = 1000.0  # critic regresses R / return_scale

    def act(self, v_d: float) -> np.ndarray:
        return nn.forward(self.actor, np.array([scale_vd(v_d)]))

    def train(self, rng: np.random.Generator) -> float:
        """K critic iterations then K actor iterations on one sampled batch.

        Returns the final critic loss.  Critic iterations never touch the
        actor parameters and vice versa.
        """
        cfg = self.cfg
        if self.buffer.size == 0:
            raise BufferEmpty("no finished episodes stored")
        # Episodes are scarce (one record per 1000-step episode), so train on
        # every stored record up to a cap rather than a small random batch;
        # data starvation otherwise lets the actor chase critic artifacts.
        if self.buffer.size <= cfg.one_step_batch:
            idx = np.arange(self.buffer.size)
        else:
            idx = rng.integers(0, self.buffer.size, size=cfg.one_step_batch)
        n = len(idx)
        v_d = self.buffer.v_d[idx]
        act = self.buffer.act[idx]
        ret = self.buffer.ret[idx]
        x = np.concatenate([scale_vd(v_d)[:, None], act], axis=1)
        y = ret / self.return_scale

        loss = 0.0
        for _ in range(cfg.one_step_train_iters):
            q, acts = nn.forward_cached(self.critic, x)
            err = q[:, 0] - y
            loss = float(np.mean(err ** 2))
            gw, gb, _ = nn.backward_from_acts(self.critic, acts,
                                              (2.0 / n) * err[:, None])
            if cfg.critic_weight_decay > 0.0:
                # L2 on weights keeps the critic surface flat away from the
                # data, so the actor phase cannot profit from extrapolation
                for w, g in zip(self.critic.weights, gw):
                    g += cfg.critic_weight_decay * w
            nn.adam_step(self.opt_critic, self.critic, gw, gb)

        vd_in = scale_vd(v_d)[:, None]
        for _ in range(cfg.one_step_train_iters):
            a_pi, actor_acts = nn.forward_cached(self.actor, vd_in)
            xa = np.concatenate([vd_in, a_pi], axis=1)
            _, critic_acts = nn.forward_cached(self.critic, xa)
            _, _, g_in = nn.backward_from_acts(
                self.critic, critic_acts, np.full((n, 1), -1.0 / n))
            g_action = g_in[:, 1:]
            gw, gb, _ = nn.backward_from_acts(self.actor, actor_acts, g_action)
            nn.adam_step(self.opt_actor, self.actor, gw, gb)
        return loss
