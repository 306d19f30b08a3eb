"""RL environment: reward, early stop, episode lifecycle, observation assembly.

The environment consumes *normalized* actions in [-1, 1]^d (the trainers'
action space) and maps them to physical quantities through ActionBounds:
torques for the direct policy, foot targets + gains for the structured
policy, trajectory/gain scalings for the highly structured policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .controllers import (ActionBounds, Observation, ScalingParams,
                          TrajectoryParams, TrotController,
                          default_trajectory, impedance_torques,
                          structured_action_to_targets)
from .dynamics import RobotModel, SimConfig, SimState, NonFiniteState
from .kinematics import (SingularConfiguration, cart_to_polar,
                         leg_polar_state, polar_jacobian)

POLICY_KINDS = ("direct", "structured", "highly")


class InvalidDesiredVelocity(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 1000
    v_d_range: tuple[float, float] = (1.0, 5.0)
    early_stop_enabled: bool = True
    pitch_limit: float = 1.0
    height_limit: float = 0.3
    joint_perturbation: float = 0.02


@dataclass
class StepResult:
    observation: Observation
    reward: float
    terminated: bool
    truncated: bool
    info: dict


def reward(v_t: float, v_d: float) -> float:
    """Velocity-tracking reward 1 - |v_t - v_d| / v_d."""
    if v_d <= 0.0:
        raise InvalidDesiredVelocity(f"v_d must be positive, got {v_d}")
    return 1.0 - abs(v_t - v_d) / v_d


def check_early_stop(state: SimState, cfg: EpisodeConfig) -> bool:
    """Failure detection: excessive pitch or collapsed body height."""
    if not cfg.early_stop_enabled:
        return False
    return abs(state.q[2]) > cfg.pitch_limit or state.q[1] < cfg.height_limit


def nominal_stance_angles(model: RobotModel, stand_height: float
                          ) -> tuple[float, float]:
    """Hip/knee angles putting the foot straight below the hip at distance
    stand_height."""
    l1, l2 = model.thigh_length, model.shank_length
    r = stand_height
    ck = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    qk = math.acos(min(max(ck, -1.0), 1.0))
    qh = -math.atan2(l2 * math.sin(qk), l1 + l2 * math.cos(qk))
    return qh, qk


def _safe_knee(knee: float, margin: float = 0.01) -> float:
    # keep the polar Jacobian away from the straight/folded singularities
    return min(max(knee, margin), math.pi - margin)


class LocomotionEnv:
    """Sequential step/reset environment wrapping dynamics + controllers."""

    def __init__(self, policy_kind: str,
                 model: RobotModel | None = None,
                 sim: SimConfig | None = None,
                 episode: EpisodeConfig | None = None,
                 bounds: ActionBounds | None = None,
                 nominal: TrajectoryParams | None = None):
        if policy_kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {policy_kind!r}")
        self.policy_kind = policy_kind
        self.model = model or RobotModel()
        self.sim = sim or SimConfig()
        self.episode = episode or EpisodeConfig()
        self.bounds = bounds or ActionBounds()
        self.nominal = nominal or default_trajectory()
        self.trot = TrotController(self.model, self.nominal, self.bounds)
        self.state: SimState | None = None
        self.v_d = 0.0
        self.step_count = 0
        self._min_reward = 0.0

    @property
    def action_dim(self) -> int:
        return self.bounds.action_dim(self.policy_kind)

    def reset(self, rng: np.random.Generator,
              v_d: float | None = None) -> Observation:
        """Nominal standing configuration with small joint perturbations."""
        cfg = self.episode
        stand = -self.nominal.P_0[1]
        qh, qk = nominal_stance_angles(self.model, stand)
        q = np.zeros(dynamics.N_Q)
        for i in range(dynamics.N_LEGS):
            q[3 + 2 * i] = qh
            q[4 + 2 * i] = qk
        if cfg.joint_perturbation > 0.0:
            q[3:] += rng.uniform(-cfg.joint_perturbation,
                                 cfg.joint_perturbation, size=8)
        # drop the base so the lowest foot sits exactly on the ground
        q[1] = 0.0
        feet, _, _ = dynamics.foot_states(self.model, q, np.zeros(dynamics.N_Q))
        q[1] = self.sim.ground_height - feet[:, 1].min()

        self.state = SimState(q, np.zeros(dynamics.N_Q))
        feet, _, _ = dynamics.foot_states(self.model, q, self.state.qdot)
        self.state.contact_flags = feet[:, 1] <= self.sim.ground_height + 1e-12
        if v_d is None:
            v_d = float(rng.uniform(*cfg.v_d_range))
        if v_d <= 0.0:
            raise InvalidDesiredVelocity(f"v_d must be positive, got {v_d}")
        self.v_d = v_d
        self.step_count = 0
        self._min_reward = 0.0
        self.trot.reset(0.0)
        return self._observe()

    def _observe(self) -> Observation:
        s = self.state
        return Observation(
            v_d=self.v_d, com_height=float(s.q[1]), pitch=float(s.q[2]),
            com_vx=float(s.qdot[0]), com_vz=float(s.qdot[1]),
            pitch_rate=float(s.qdot[2]),
            joint_angles=s.q[3:11].copy(), joint_rates=s.qdot[3:11].copy(),
            contact_flags=s.contact_flags.copy())

    def _torques(self, action: np.ndarray) -> np.ndarray:
        u = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        if u.shape != (self.action_dim,):
            raise ValueError(
                f"action must have length {self.action_dim}, got {u.shape}")
        s = self.state
        if self.policy_kind == "direct":
            return self.bounds.to_physical("direct", u)
        if self.policy_kind == "structured":
            a = self.bounds.to_physical("structured", u)
            targets, gains = structured_action_to_targets(a)
            desired, actual, jacs = [], [], []
            for i in range(dynamics.N_LEGS):
                desired.append(cart_to_polar(targets[i]))
                hip = s.q[3 + 2 * i]
                knee = _safe_knee(s.q[4 + 2 * i])
                actual.append(leg_polar_state(
                    self.model, hip, knee, s.qdot[3 + 2 * i], s.qdot[4 + 2 * i]))
                jacs.append(polar_jacobian(self.model, hip, knee))
            return impedance_torques(gains, desired, actual, jacs,
                                     self.model.max_torque)
        # highly structured: scalings are constant over the episode
        scaling = ScalingParams.from_vector(self.bounds.to_physical("highly", u))
        q = s.q.copy()
        for i in range(dynamics.N_LEGS):
            q[4 + 2 * i] = _safe_knee(q[4 + 2 * i])
        return self.trot.torques(scaling, q, s.qdot, s.contact_flags, s.time)

    def step(self, action: np.ndarray,
             external_force: tuple[float, float] = (0.0, 0.0)) -> StepResult:
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        torques = self._torques(action)
        terminated = False
        try:
            self.state = dynamics.step(self.model, self.sim, self.state,
                                       torques, external_force)
            r = reward(float(self.state.qdot[0]), self.v_d)
        except NonFiniteState:
            terminated = True
            r = self._min_reward
        self._min_reward = min(self._min_reward, r)
        self.step_count += 1

        if not terminated:
            terminated = check_early_stop(self.state, self.episode)
        truncated = (not terminated) and self.step_count >= self.episode.max_steps

        clamped = np.clip(torques, -self.model.max_torque, self.model.max_torque)
        info = {
            "com_vx": float(self.state.qdot[0]),
            "com_height": float(self.state.q[1]),
            "pitch": float(self.state.q[2]),
            "power": float(getattr(self.state, "last_power", 0.0)),
            "torques": clamped,
            "contact_flags": self.state.contact_flags.copy(),
            "time": self.state.time,
            "q": self.state.q.copy(),
            "qdot": self.state.qdot.copy(),
        }
        return StepResult(self._observe(), r, terminated, truncated, info)
