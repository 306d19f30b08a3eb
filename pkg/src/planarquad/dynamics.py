"""Planar articulated rigid-body simulation of an 11-DoF quadruped.

Generalized coordinates (length 11):
    q = [base_x, base_z, pitch, FL_hip, FL_knee, FR_hip, FR_knee,
         BL_hip, BL_knee, BR_hip, BR_knee]

Conventions: hip angle is measured from the downward vertical of the body
frame, positive forward; knee angle is the interior flexion angle from the
straight leg.  Contact is a compliant penalty model (normal spring-damper,
anchored tangential spring with a Coulomb clamp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _core

N_Q = 11
N_LEGS = 4
N_JOINTS = 8
LEG_NAMES = ("FL", "FR", "BL", "BR")


class NonFiniteState(RuntimeError):
    """The integrator produced NaN/Inf; the episode must be aborted."""


def _cylinder_inertia(mass: float, length: float, radius: float) -> float:
    # solid cylinder lying in-plane, rotating about the out-of-plane axis
    return mass * (length * length / 12.0 + radius * radius / 4.0)


@dataclass(frozen=True)
class RobotModel:
    body_length: float = 0.6
    body_radius: float = 0.05
    thigh_length: float = 0.283
    thigh_radius: float = 0.03
    shank_length: float = 0.283
    shank_radius: float = 0.03
    total_mass: float = 14.0
    hip_range: tuple[float, float] = (math.radians(-80.0), math.radians(80.0))
    knee_range: tuple[float, float] = (math.radians(10.0), math.radians(170.0))
    max_torque: float = 100.0
    gravity: float = 9.81
    ground_stiffness: float = 1e5
    ground_damping: float = 1e3
    tangential_damping: float = 100.0
    friction_coeff: float = 0.8
    joint_limit_stiffness: float = 1e3
    joint_limit_damping: float = 10.0
    # hip positions in the body frame; front pair at +L/2, back pair at -L/2
    hip_offsets: tuple[tuple[float, float], ...] = (
        (0.3, 0.0), (0.3, 0.0), (-0.3, 0.0), (-0.3, 0.0))

    def __post_init__(self) -> None:
        for name in ("body_length", "thigh_length", "shank_length",
                     "body_radius", "thigh_radius", "shank_radius"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.total_mass <= 0.0:
            raise ValueError("total_mass must be strictly positive")

    @property
    def segment_masses(self) -> dict[str, float]:
        """Per-segment masses, distributed proportional to cylinder volume."""
        v_body = math.pi * self.body_radius**2 * self.body_length
        v_leg = math.pi * self.thigh_radius**2 * self.thigh_length
        v_total = v_body + 8.0 * v_leg
        m_body = self.total_mass * v_body / v_total
        m_leg = self.total_mass * v_leg / v_total
        return {"body": m_body, "thigh": m_leg, "shank": m_leg}

    @property
    def leg_length(self) -> float:
        return self.thigh_length + self.shank_length

    def packed(self) -> np.ndarray:
        m = self.segment_masses
        return np.array([
            m["body"],
            _cylinder_inertia(m["body"], self.body_length, self.body_radius),
            m["thigh"],
            _cylinder_inertia(m["thigh"], self.thigh_length, self.thigh_radius),
            m["shank"],
            _cylinder_inertia(m["shank"], self.shank_length, self.shank_radius),
            self.thigh_length,
            self.shank_length,
            self.hip_offsets[0][0],
            self.hip_offsets[1][0],
            self.hip_offsets[2][0],
            self.hip_offsets[3][0],
            self.gravity,
        ])


@dataclass(frozen=True)
class SimConfig:
    control_dt: float = 0.01
    substeps: int = 10
    ground_height: float = 0.0

    def __post_init__(self) -> None:
        if self.control_dt <= 0.0:
            raise ValueError("control_dt must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


@dataclass
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    time: float = 0.0
    foot_anchor: list[tuple[float, float] | None] = field(
        default_factory=lambda: [None] * N_LEGS)
    contact_flags: np.ndarray = field(
        default_factory=lambda: np.zeros(N_LEGS, dtype=bool))

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if self.q.shape != (N_Q,) or self.qdot.shape != (N_Q,):
            raise ValueError(f"q and qdot must have length {N_Q}")

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qdot.copy(), self.time,
                        list(self.foot_anchor), self.contact_flags.copy())


def mass_matrix(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Joint-space inertia matrix M(q); symmetric positive definite."""
    q = np.asarray(q, dtype=float)
    M, _, _, _, _ = _core.kin_dyn(q, np.zeros(N_Q), model.packed())
    return M


def bias_forces(model: RobotModel, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Coriolis/centrifugal + gravity forces h with M qddot = tau - h."""
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    _, h, _, _, _ = _core.kin_dyn(q, qdot, model.packed())
    return h


def foot_states(model: RobotModel, q: np.ndarray, qdot: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World-frame foot positions (4,2), velocities (4,2), Jacobians (4,2,11)."""
    _, _, pos, vel, jac = _core.kin_dyn(
        np.asarray(q, dtype=float), np.asarray(qdot, dtype=float), model.packed())
    return pos, vel, jac


def _contact_par(model: RobotModel, config: SimConfig) -> np.ndarray:
    return np.array([
        config.ground_height, model.ground_stiffness, model.ground_damping,
        model.ground_stiffness, model.tangential_damping, model.friction_coeff])


def contact_forces(model: RobotModel, state: SimState,
                   config: SimConfig | None = None
                   ) -> tuple[np.ndarray, list[tuple[float, float] | None]]:
    """Per-leg penalty contact force (4,2) and updated anchors.

    Normal: k*pen + c*max(0, -vz), clamped >= 0.  Tangential: spring to the
    ground anchor (plus viscous term), Coulomb-clamped with anchor slip.
    """
    config = config or SimConfig()
    cpar = _contact_par(model, config)
    pos, vel, _ = foot_states(model, state.q, state.qdot)
    forces = np.zeros((N_LEGS, 2))
    anchors: list[tuple[float, float] | None] = [None] * N_LEGS
    for i in range(N_LEGS):
        old = state.foot_anchor[i]
        on = 0 if old is None else 1
        ax = 0.0 if old is None else old[0]
        fx, fz, on2, ax2 = _core.contact_force_1d(
            pos[i, 0], pos[i, 1], vel[i, 0], vel[i, 1], on, ax, cpar)
        forces[i, 0] = fx
        forces[i, 1] = fz
        anchors[i] = (ax2, config.ground_height) if on2 else None
    return forces, anchors


def step(model: RobotModel, config: SimConfig, state: SimState,
         joint_torques: np.ndarray,
         external_force: np.ndarray | tuple[float, float] = (0.0, 0.0)
         ) -> SimState:
    """Advance one control step of `config.substeps` semi-implicit Euler substeps.

    Torques are clamped to +-max_torque and held over the substeps; the
    external force acts at the base COM.  Raises NonFiniteState on blow-up.
    """
    tau = np.clip(np.asarray(joint_torques, dtype=float),
                  -model.max_torque, model.max_torque)
    if tau.shape != (N_JOINTS,):
        raise ValueError(f"joint_torques must have length {N_JOINTS}")
    fext = np.asarray(external_force, dtype=float)

    anchor_on = np.zeros(N_LEGS, dtype=np.int64)
    anchor_x = np.zeros(N_LEGS)
    for i in range(N_LEGS):
        if state.foot_anchor[i] is not None:
            anchor_on[i] = 1
            anchor_x[i] = state.foot_anchor[i][0]

    lpar = np.array([
        model.hip_range[0], model.hip_range[1],
        model.knee_range[0], model.knee_range[1],
        model.joint_limit_stiffness, model.joint_limit_damping,
        model.max_torque])

    dt = config.control_dt / config.substeps
    q, qdot, power = _core.substeps(
        state.q, state.qdot, config.substeps, dt, tau, fext,
        anchor_on, anchor_x, model.packed(), _contact_par(model, config), lpar)

    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        raise NonFiniteState(f"non-finite state at t={state.time + config.control_dt}")

    pos, _, _ = foot_states(model, q, qdot)
    flags = pos[:, 1] <= config.ground_height
    anchors: list[tuple[float, float] | None] = [
        (anchor_x[i], config.ground_height) if anchor_on[i] else None
        for i in range(N_LEGS)]
    new = SimState(q, qdot, state.time + config.control_dt, anchors, flags)
    new.last_power = power  # mean over substeps of sum_j |tau_j * qdot_j|
    return new


def kinetic_energy(model: RobotModel, q: np.ndarray, qdot: np.ndarray) -> float:
    qdot = np.asarray(qdot, dtype=float)
    return 0.5 * float(qdot @ mass_matrix(model, q) @ qdot)


def potential_energy(model: RobotModel, q: np.ndarray) -> float:
    """Gravitational potential of all nine segments."""
    q = np.asarray(q, dtype=float)
    m = model.segment_masses
    x, z, phi = q[0], q[1], q[2]
    total = m["body"] * z
    for i in range(N_LEGS):
        ox = model.hip_offsets[i][0]
        hip_z = z + ox * math.sin(phi)
        at = phi + q[3 + 2 * i]
        as_ = at + q[4 + 2 * i]
        thigh_z = hip_z - 0.5 * model.thigh_length * math.cos(at)
        shank_z = (hip_z - model.thigh_length * math.cos(at)
                   - 0.5 * model.shank_length * math.cos(as_))
        total += m["thigh"] * thigh_z + m["shank"] * shank_z
    return model.gravity * total


def with_overrides(model: RobotModel, **kwargs) -> RobotModel:
    return replace(model, **kwargs)
