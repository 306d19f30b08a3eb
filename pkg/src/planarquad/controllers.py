"""The three locomotion policy structures.

* direct: actor maps the 26-d observation straight to 8 joint torques.
* structured: actor outputs per-leg Cartesian foot targets/velocities plus
  shared polar impedance gains; a Jacobian-transpose impedance law turns
  those into torques.
* highly structured: actor sees only the desired velocity and outputs 18
  scaling parameters for a trot controller (gait-pattern modulator +
  Bezier/sinusoid leg-trajectory generator) feeding the same impedance law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .dynamics import RobotModel, N_LEGS
from .kinematics import (FootTarget, PolarFootState, cart_to_polar,
                         leg_polar_state, polar_jacobian)

OBS_DIM = 26
N_BEZIER = 12


class BoundsViolation(ValueError):
    pass


@dataclass(frozen=True)
class Observation:
    v_d: float
    com_height: float
    pitch: float
    com_vx: float
    com_vz: float
    pitch_rate: float
    joint_angles: np.ndarray   # length 8
    joint_rates: np.ndarray    # length 8
    contact_flags: np.ndarray  # length 4, boolean

    def to_vector(self) -> np.ndarray:
        v = np.empty(OBS_DIM)
        v[0:6] = (self.v_d, self.com_height, self.pitch,
                  self.com_vx, self.com_vz, self.pitch_rate)
        v[6:14] = self.joint_angles
        v[14:22] = self.joint_rates
        v[22:26] = np.asarray(self.contact_flags, dtype=float)
        return v


@dataclass(frozen=True)
class ImpedanceGains:
    k_r: float
    b_r: float
    k_theta: float
    b_theta: float


@dataclass(frozen=True)
class TrajectoryParams:
    T_st: float
    T_sw: float
    bezier_points: np.ndarray  # (12, 2), hip frame
    l_span: float
    delta: float
    P_0: np.ndarray            # (2,), hip frame

    def __post_init__(self) -> None:
        object.__setattr__(self, "bezier_points",
                           np.asarray(self.bezier_points, dtype=float))
        object.__setattr__(self, "P_0", np.asarray(self.P_0, dtype=float))
        if self.T_st <= 0.0 or self.T_sw <= 0.0:
            raise ValueError("phase periods must be positive")
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")
        if self.bezier_points.shape != (N_BEZIER, 2):
            raise ValueError("bezier_points must be 12 x 2")

    @property
    def cycle_time(self) -> float:
        return self.T_st + self.T_sw

    @property
    def stance_fraction(self) -> float:
        return self.T_st / (self.T_st + self.T_sw)

    @property
    def stance_entry(self) -> np.ndarray:
        """Foot position at touchdown (stance u = 0): P_0 + (l_span, 0)."""
        return self.P_0 + np.array([self.l_span, 0.0])

    @property
    def stance_exit(self) -> np.ndarray:
        """Foot position at lift-off (stance u = 1): P_0 - (l_span, 0)."""
        return self.P_0 - np.array([self.l_span, 0.0])


def default_trajectory(T_st: float = 0.18, T_sw: float = 0.18,
                       l_span: float = 0.16, delta: float = 0.02,
                       p0: tuple[float, float] = (-0.19, -0.42),
                       swing_height: float = 0.06) -> TrajectoryParams:
    """Nominal trot trajectory: sinusoidal stance, arched Bezier swing.

    The defaults were tuned empirically: the stance center sits behind the
    hip (p0 x < 0) so touchdown happens closer to under the body, which
    avoids a braking impulse every step and lets the k_T period scaling
    cover the 1-5 m/s desired-velocity range.
    """
    p0 = np.asarray(p0, dtype=float)
    start = p0 - np.array([l_span, 0.0])   # stance exit = swing start
    end = p0 + np.array([l_span, 0.0])     # stance entry = swing end
    pts = np.zeros((N_BEZIER, 2))
    for j in range(N_BEZIER):
        f = j / (N_BEZIER - 1)
        pts[j, 0] = start[0] + f * (end[0] - start[0])
        pts[j, 1] = p0[1] + swing_height * math.sin(math.pi * f)
    pts[0] = start
    pts[-1] = end
    return TrajectoryParams(T_st, T_sw, pts, l_span, delta, p0)


@dataclass(frozen=True)
class ScalingParams:
    k_T: float
    k_C: np.ndarray            # length 12
    k_delta: float
    gains: ImpedanceGains

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_C", np.asarray(self.k_C, dtype=float))
        if self.k_C.shape != (N_BEZIER,):
            raise ValueError("k_C must have length 12")

    def flatten(self) -> np.ndarray:
        g = self.gains
        return np.concatenate(([self.k_T], self.k_C,
                               [self.k_delta, g.k_r, g.b_r, g.k_theta, g.b_theta]))

    @classmethod
    def from_vector(cls, a: np.ndarray) -> "ScalingParams":
        a = np.asarray(a, dtype=float)
        if a.shape != (18,):
            raise ValueError("scaling action must have length 18")
        return cls(a[0], a[1:13], a[13],
                   ImpedanceGains(a[14], a[15], a[16], a[17]))


@dataclass(frozen=True)
class ActionBounds:
    """Physical ranges behind each policy's normalized [-1, 1] action box."""
    max_torque: float = 100.0
    foot_x: tuple[float, float] = (-0.25, 0.25)
    foot_y: tuple[float, float] = (-0.55, -0.25)
    foot_vel: tuple[float, float] = (-3.0, 3.0)
    k_r: tuple[float, float] = (500.0, 10000.0)
    b_r: tuple[float, float] = (10.0, 300.0)
    k_theta: tuple[float, float] = (20.0, 400.0)
    b_theta: tuple[float, float] = (0.5, 20.0)
    k_T: tuple[float, float] = (0.5, 1.5)
    k_C: tuple[float, float] = (0.5, 1.5)
    k_delta: tuple[float, float] = (0.0, 2.0)

    def box(self, policy_kind: str) -> tuple[np.ndarray, np.ndarray]:
        """Physical (lo, hi) vectors of the action box for a policy kind."""
        if policy_kind == "direct":
            lo = np.full(8, -self.max_torque)
            return lo, -lo
        if policy_kind == "structured":
            lo, hi = [], []
            for rng, n in ((self.foot_x, 4), (self.foot_y, 4),
                           (self.foot_vel, 8), (self.k_r, 1), (self.b_r, 1),
                           (self.k_theta, 1), (self.b_theta, 1)):
                lo += [rng[0]] * n
                hi += [rng[1]] * n
            return np.array(lo), np.array(hi)
        if policy_kind == "highly":
            lo, hi = [], []
            for rng, n in ((self.k_T, 1), (self.k_C, 12), (self.k_delta, 1),
                           (self.k_r, 1), (self.b_r, 1),
                           (self.k_theta, 1), (self.b_theta, 1)):
                lo += [rng[0]] * n
                hi += [rng[1]] * n
            return np.array(lo), np.array(hi)
        raise ValueError(f"unknown policy kind {policy_kind!r}")

    def to_physical(self, policy_kind: str, u: np.ndarray) -> np.ndarray:
        """Affine map from normalized [-1, 1] to physical bounds."""
        lo, hi = self.box(policy_kind)
        u = np.asarray(u, dtype=float)
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * u

    def action_dim(self, policy_kind: str) -> int:
        return len(self.box(policy_kind)[0])


# --- gait pattern modulator -------------------------------------------------

TROT_OFFSETS = np.array([0.0, 0.5, 0.5, 0.0])  # FL, FR, BL, BR


@dataclass
class GaitPhase:
    phases: np.ndarray = field(default_factory=lambda: TROT_OFFSETS.copy())
    last_time: float = 0.0
    touchdown_time: float = 0.0  # last reference-leg (FL) touchdown

    def mode(self, leg: int, params: TrajectoryParams) -> str:
        return "stance" if self.phases[leg] < params.stance_fraction else "swing"

    def trot_paired(self, tol: float = 1e-9) -> bool:
        p = self.phases
        d1 = abs(math.remainder(p[0] - p[3], 1.0))
        d2 = abs(math.remainder(p[1] - p[2], 1.0))
        d3 = abs(math.remainder(p[0] + 0.5 - p[1], 1.0))
        return d1 < tol and d2 < tol and d3 < tol


def gait_modulator(phase: GaitPhase, t: float, params: TrajectoryParams,
                   fl_touchdown_event: bool) -> GaitPhase:
    """Advance per-leg phases; resynchronize on a reference-leg touchdown."""
    dt = t - phase.last_time
    if dt < 0.0:
        raise ValueError("time must be non-decreasing across calls")
    if fl_touchdown_event:
        new = TROT_OFFSETS.copy()
        return GaitPhase(new, t, t)
    new = (phase.phases + dt / params.cycle_time) % 1.0
    return GaitPhase(new, t, phase.touchdown_time)


# --- leg trajectory generator -----------------------------------------------

_BINOM_11 = np.array([math.comb(11, j) for j in range(12)], dtype=float)
_BINOM_10 = np.array([math.comb(10, j) for j in range(11)], dtype=float)


def stance_target(params: TrajectoryParams, u: float) -> FootTarget:
    """Sinusoidal stance sweep, u in [0, 1] over T_st."""
    x = params.P_0[0] + params.l_span * (1.0 - 2.0 * u)
    y = params.P_0[1] - params.delta * math.sin(math.pi * u)
    xd = -2.0 * params.l_span / params.T_st
    yd = -params.delta * math.pi * math.cos(math.pi * u) / params.T_st
    return FootTarget(x, y, xd, yd)


def swing_target(params: TrajectoryParams, u: float) -> FootTarget:
    """Degree-11 Bezier over the 12 control points, u in [0, 1] over T_sw."""
    pts = params.bezier_points
    b = _BINOM_11 * u ** np.arange(12) * (1.0 - u) ** (11 - np.arange(12))
    pos = b @ pts
    diffs = pts[1:] - pts[:-1]
    bd = _BINOM_10 * u ** np.arange(11) * (1.0 - u) ** (10 - np.arange(11))
    vel = 11.0 * (bd @ diffs) / params.T_sw
    return FootTarget(pos[0], pos[1], vel[0], vel[1])


def leg_trajectory(params: TrajectoryParams, phase: float, mode: str
                   ) -> FootTarget:
    """Foot target at a cycle phase in [0, 1); mode selects the segment."""
    rho = params.stance_fraction
    if mode == "stance":
        u = min(max(phase / rho, 0.0), 1.0)
        return stance_target(params, u)
    if mode == "swing":
        u = min(max((phase - rho) / (1.0 - rho), 0.0), 1.0)
        return swing_target(params, u)
    raise ValueError(f"unknown mode {mode!r}")


def apply_scaling(nominal: TrajectoryParams, s: ScalingParams,
                  bounds: ActionBounds | None = None) -> TrajectoryParams:
    """Scale the nominal trajectory: periods by k_T, control-point offsets
    from P_0 by k_C (per point), stance amplitude by k_delta."""
    if bounds is not None:
        checks = [(s.k_T, bounds.k_T, "k_T"), (s.k_delta, bounds.k_delta, "k_delta")]
        checks += [(kc, bounds.k_C, "k_C") for kc in s.k_C]
        for value, rng, name in checks:
            if not rng[0] <= value <= rng[1]:
                raise BoundsViolation(f"{name}={value:.4g} outside {rng}")
    pts = nominal.P_0 + s.k_C[:, None] * (nominal.bezier_points - nominal.P_0)
    scaled = TrajectoryParams(
        T_st=s.k_T * nominal.T_st,
        T_sw=s.k_T * nominal.T_sw,
        bezier_points=pts,
        l_span=nominal.l_span,
        delta=s.k_delta * nominal.delta,
        P_0=nominal.P_0.copy(),
    )
    # re-pin the swing endpoints so stance and swing join continuously
    pts = scaled.bezier_points.copy()
    pts[0] = scaled.stance_exit
    pts[-1] = scaled.stance_entry
    return replace(scaled, bezier_points=pts)


# --- policies ----------------------------------------------------------------


def direct_policy(actor: nn.MlpParams, obs: Observation,
                  max_torque: float = 100.0) -> np.ndarray:
    """Joint torques straight from the actor, tanh-squashed to +-max_torque."""
    if actor.input_width != OBS_DIM or actor.output_width != 8:
        raise nn.DimensionMismatch(
            f"direct actor must be {OBS_DIM}->8, got "
            f"{actor.input_width}->{actor.output_width}")
    return max_torque * nn.forward(actor, obs.to_vector())


def structured_policy(actor: nn.MlpParams, obs: Observation,
                      bounds: ActionBounds | None = None
                      ) -> tuple[list[FootTarget], ImpedanceGains]:
    """Per-leg Cartesian foot targets + shared impedance gains."""
    bounds = bounds or ActionBounds()
    if actor.input_width != OBS_DIM or actor.output_width != 20:
        raise nn.DimensionMismatch(
            f"structured actor must be {OBS_DIM}->20, got "
            f"{actor.input_width}->{actor.output_width}")
    a = bounds.to_physical("structured", nn.forward(actor, obs.to_vector()))
    return structured_action_to_targets(a)


def structured_action_to_targets(a: np.ndarray
                                 ) -> tuple[list[FootTarget], ImpedanceGains]:
    """Split a physical 20-d structured action into targets and gains."""
    a = np.asarray(a, dtype=float)
    targets = [FootTarget(a[i], a[4 + i], a[8 + i], a[12 + i])
               for i in range(N_LEGS)]
    gains = ImpedanceGains(a[16], a[17], a[18], a[19])
    return targets, gains


def highly_structured_policy(actor: nn.MlpParams, v_d: float,
                             bounds: ActionBounds | None = None
                             ) -> ScalingParams:
    """Trajectory/gain scalings from the desired velocity alone."""
    bounds = bounds or ActionBounds()
    if actor.input_width != 1 or actor.output_width != 18:
        raise nn.DimensionMismatch(
            f"highly structured actor must be 1->18, got "
            f"{actor.input_width}->{actor.output_width}")
    u = nn.forward(actor, np.array([scale_vd(v_d)]))
    return ScalingParams.from_vector(bounds.to_physical("highly", u))


def scale_vd(v_d: float) -> float:
    """Map the 1-5 m/s desired-velocity range near [-1, 1] for the actor."""
    return (v_d - 3.0) / 2.0


def impedance_torques(gains: ImpedanceGains,
                      desired: list[PolarFootState],
                      actual: list[PolarFootState],
                      jacobians: list[np.ndarray],
                      max_torque: float = 100.0) -> np.ndarray:
    """Polar impedance law per leg, mapped through J^T; clamped torques."""
    tau = np.empty(8)
    for i in range(N_LEGS):
        d, a = desired[i], actual[i]
        f = np.array([
            gains.k_r * (d.r - a.r) + gains.b_r * (d.rdot - a.rdot),
            gains.k_theta * (d.theta - a.theta)
            + gains.b_theta * (d.thetadot - a.thetadot),
        ])
        tau[2 * i:2 * i + 2] = jacobians[i].T @ f
    return np.clip(tau, -max_torque, max_torque)


# --- full trot control path ---------------------------------------------------


class TrotController:
    """Stateful highly structured controller: modulator + planner + impedance.

    The only mutable state is the gait phase and the previous FL contact
    flag used for touchdown detection.
    """

    #: earliest swing progress (fraction of the swing segment) at which an
    #: FL contact rising edge counts as a touchdown.  0.0 accepts any
    #: rising edge during swing, including the early-swing ground grazes a
    #: loosely tracking foot produces right after liftoff.  Those graze
    #: resets make the gait timing irregular, but the adaptive, high-duty
    #: cycling they induce is also what the episodic learner exploits:
    #: raising the window produces visibly cleaner limit cycles yet
    #: consistently slower, less stable training, so the permissive
    #: detector ships as the default.
    touchdown_window: float = 0.0

    def __init__(self, model: RobotModel, nominal: TrajectoryParams,
                 bounds: ActionBounds | None = None):
        self.model = model
        self.nominal = nominal
        self.bounds = bounds or ActionBounds()
        self.reset(0.0)

    def reset(self, t0: float = 0.0) -> None:
        self.phase = GaitPhase(last_time=t0, touchdown_time=t0)
        self._prev_fl_contact = True

    def torques(self, scaling: ScalingParams, q: np.ndarray, qdot: np.ndarray,
                contact_flags: np.ndarray, t: float) -> np.ndarray:
        params = apply_scaling(self.nominal, scaling)
        fl_contact = bool(contact_flags[0])
        # A resync touchdown is an FL contact rising edge during swing, at
        # or past touchdown_window of the swing segment.
        sf = params.stance_fraction
        swing_u = (self.phase.phases[0] - sf) / (1.0 - sf)
        touchdown = (fl_contact and not self._prev_fl_contact
                     and self.phase.mode(0, params) == "swing"
                     and swing_u >= self.touchdown_window)
        self._prev_fl_contact = fl_contact
        self.phase = gait_modulator(self.phase, t, params, touchdown)

        pitch, pitch_rate = q[2], qdot[2]
        desired, actual, jacs = [], [], []
        for i in range(N_LEGS):
            target = leg_trajectory(params, self.phase.phases[i],
                                    self.phase.mode(i, params))
            d = cart_to_polar(target)
            # the trajectory lives in the world frame; joint angles are
            # body-relative, so counter the base pitch in the polar angle
            desired.append(PolarFootState(d.r, d.theta - pitch,
                                          d.rdot, d.thetadot - pitch_rate))
            hip, knee = q[3 + 2 * i], q[4 + 2 * i]
            actual.append(leg_polar_state(self.model, hip, knee,
                                          qdot[3 + 2 * i], qdot[4 + 2 * i]))
            jacs.append(polar_jacobian(self.model, hip, knee))
        return impedance_torques(scaling.gains, desired, actual, jacs,
                                 self.model.max_torque)
