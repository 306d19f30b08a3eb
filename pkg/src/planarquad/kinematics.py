"""Leg kinematics: two-link FK, Cartesian<->polar transforms, polar Jacobian.

The polar task space hangs from the hip in the body frame: r is the
hip-to-foot distance, theta the leg angle from the downward vertical,
positive forward.  theta = atan2(x, -y) for a foot at (x, y) relative to
the hip (y negative below the hip).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import RobotModel


class DegenerateRadius(ValueError):
    """Foot coincides with the hip; the polar impedance is undefined."""


class SingularConfiguration(ValueError):
    """Straight or fully folded knee; the polar Jacobian is singular."""


@dataclass(frozen=True)
class PolarFootState:
    r: float
    theta: float
    rdot: float
    thetadot: float


@dataclass(frozen=True)
class FootTarget:
    """Desired foot position/velocity relative to the hip, body frame."""
    x_des: float
    y_des: float
    xdot_des: float = 0.0
    ydot_des: float = 0.0


def foot_fk(model: RobotModel, hip_angle: float, knee_angle: float
            ) -> tuple[float, float]:
    """Foot position relative to the hip in the body frame."""
    l1, l2 = model.thigh_length, model.shank_length
    a = hip_angle
    b = hip_angle + knee_angle
    return (l1 * math.sin(a) + l2 * math.sin(b),
            -l1 * math.cos(a) - l2 * math.cos(b))


def cart_to_polar(target: FootTarget) -> PolarFootState:
    """Transform a Cartesian foot target to polar coordinates."""
    x, y = target.x_des, target.y_des
    r = math.hypot(x, y)
    if r < 1e-6:
        raise DegenerateRadius(f"foot at hip (r={r:.2e} m)")
    xd, yd = target.xdot_des, target.ydot_des
    theta = math.atan2(x, -y)
    rdot = (x * xd + y * yd) / r
    thetadot = (-y * xd + x * yd) / (r * r)
    return PolarFootState(r, theta, rdot, thetadot)


def polar_jacobian(model: RobotModel, hip_angle: float, knee_angle: float
                   ) -> np.ndarray:
    """J = d(r, theta)/d(hip, knee); tau_leg = J^T [F_r, F_theta]."""
    l1, l2 = model.thigh_length, model.shank_length
    sk, ck = math.sin(knee_angle), math.cos(knee_angle)
    flex = abs(math.remainder(knee_angle, 2.0 * math.pi))
    if flex < 1e-6 or abs(flex - math.pi) < 1e-6:
        raise SingularConfiguration(
            f"knee flexion {knee_angle:.3g} rad is at a singularity")
    r2 = l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * ck
    r = math.sqrt(r2)
    return np.array([
        [0.0, -l1 * l2 * sk / r],
        [1.0, l2 * (l2 + l1 * ck) / r2],
    ])


def leg_polar_state(model: RobotModel, hip_angle: float, knee_angle: float,
                    hip_rate: float, knee_rate: float) -> PolarFootState:
    """Actual polar state of a leg from its joint angles and rates."""
    x, y = foot_fk(model, hip_angle, knee_angle)
    r = math.hypot(x, y)
    if r < 1e-6:
        raise DegenerateRadius(f"foot at hip (r={r:.2e} m)")
    theta = math.atan2(x, -y)
    J = polar_jacobian(model, hip_angle, knee_angle)
    rdot, thetadot = J @ np.array([hip_rate, knee_rate])
    return PolarFootState(r, theta, float(rdot), float(thetadot))


def polar_to_cart(r: float, theta: float) -> tuple[float, float]:
    return r * math.sin(theta), -r * math.cos(theta)
