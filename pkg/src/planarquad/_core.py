"""Numba-compiled inner loops for the planar rigid-body simulation.

Everything here works on packed float64 arrays so the hot path (one physics
substep) stays allocation-light and JIT-friendly.  The public, typed surface
lives in `dynamics.py`; this module is an implementation detail.

Packed parameter layout (``par``):
    [m_body, I_body, m_thigh, I_thigh, m_shank, I_shank,
     L_thigh, L_shank, hip_x_FL, hip_x_FR, hip_x_BL, hip_x_BR, g]

Contact parameters (``cpar``):
    [ground_height, k_normal, c_normal, k_tangent, c_tangent, mu]

Joint-limit / torque parameters (``lpar``):
    [hip_lo, hip_hi, knee_lo, knee_hi, k_limit, b_limit, tau_max]
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

N_Q = 11
N_LEGS = 4


@njit(cache=True)
def kin_dyn(q, qdot, par):
    """Mass matrix, bias forces and foot kinematics in one pass.

    Returns (M, h, feet_pos, feet_vel, feet_jac) where h satisfies
    M(q) qddot = tau_gen - h(q, qdot); gravity is included in h.
    """
    m_b, I_b = par[0], par[1]
    m_t, I_t = par[2], par[3]
    m_s, I_s = par[4], par[5]
    L1, L2 = par[6], par[7]
    g = par[12]

    x, z, phi = q[0], q[1], q[2]
    phid = qdot[2]
    c, s = np.cos(phi), np.sin(phi)

    M = np.zeros((N_Q, N_Q))
    h = np.zeros(N_Q)
    feet_pos = np.zeros((N_LEGS, 2))
    feet_vel = np.zeros((N_LEGS, 2))
    feet_jac = np.zeros((N_LEGS, 2, N_Q))

    # base body: translation + rotation about its own COM
    M[0, 0] += m_b
    M[1, 1] += m_b
    M[2, 2] += I_b
    h[1] += m_b * g  # gravity only; base has no velocity-product terms

    for i in range(N_LEGS):
        ox = par[8 + i]
        ih = 3 + 2 * i
        ik = 4 + 2 * i
        qh, qk = q[ih], q[ik]
        qhd, qkd = qdot[ih], qdot[ik]

        at = phi + qh          # thigh axis angle from world downward vertical
        as_ = at + qk          # shank axis angle
        atd = phid + qhd
        asd = atd + qkd

        sat, cat = np.sin(at), np.cos(at)
        sas, cas = np.sin(as_), np.cos(as_)

        # hip point and its phi-derivative (R(phi) @ (ox, 0))
        hip_x = x + ox * c
        hip_z = z + ox * s
        dhip_x = -ox * s
        dhip_z = ox * c

        # direction d(a) = (sin a, -cos a), d'(a) = (cos a, sin a)
        # thigh COM Jacobian columns (only 0, 1, 2, ih nonzero)
        t2x = dhip_x + 0.5 * L1 * cat
        t2z = dhip_z + 0.5 * L1 * sat
        thx = 0.5 * L1 * cat
        thz = 0.5 * L1 * sat

        # shank COM Jacobian columns (0, 1, 2, ih, ik)
        s2x = dhip_x + L1 * cat + 0.5 * L2 * cas
        s2z = dhip_z + L1 * sat + 0.5 * L2 * sas
        shx = L1 * cat + 0.5 * L2 * cas
        shz = L1 * sat + 0.5 * L2 * sas
        skx = 0.5 * L2 * cas
        skz = 0.5 * L2 * sas

        # --- mass matrix: m J^T J with sparse columns, plus I w^T w ---
        # thigh: J columns {0:(1,0), 1:(0,1), 2:(t2x,t2z), ih:(thx,thz)},
        #        w columns {2:1, ih:1}
        M[0, 0] += m_t
        M[1, 1] += m_t
        M[0, 2] += m_t * t2x
        M[1, 2] += m_t * t2z
        M[0, ih] += m_t * thx
        M[1, ih] += m_t * thz
        M[2, 2] += m_t * (t2x * t2x + t2z * t2z) + I_t
        M[2, ih] += m_t * (t2x * thx + t2z * thz) + I_t
        M[ih, ih] += m_t * (thx * thx + thz * thz) + I_t

        # shank: J columns {0,1,2,ih,ik}, w columns {2,ih,ik}
        M[0, 0] += m_s
        M[1, 1] += m_s
        M[0, 2] += m_s * s2x
        M[1, 2] += m_s * s2z
        M[0, ih] += m_s * shx
        M[1, ih] += m_s * shz
        M[0, ik] += m_s * skx
        M[1, ik] += m_s * skz
        M[2, 2] += m_s * (s2x * s2x + s2z * s2z) + I_s
        M[2, ih] += m_s * (s2x * shx + s2z * shz) + I_s
        M[2, ik] += m_s * (s2x * skx + s2z * skz) + I_s
        M[ih, ih] += m_s * (shx * shx + shz * shz) + I_s
        M[ih, ik] += m_s * (shx * skx + shz * skz) + I_s
        M[ik, ik] += m_s * (skx * skx + skz * skz) + I_s

        # --- velocity-product accelerations (qddot = 0) ---
        # hip point: -R(phi) o phid^2; each d(a) term contributes -d(a) adot^2
        ahx = -ox * c * phid * phid
        ahz = -ox * s * phid * phid
        a_tx = ahx - 0.5 * L1 * sat * atd * atd
        a_tz = ahz + 0.5 * L1 * cat * atd * atd
        a_sx = ahx - L1 * sat * atd * atd - 0.5 * L2 * sas * asd * asd
        a_sz = ahz + L1 * cat * atd * atd + 0.5 * L2 * cas * asd * asd

        # h += m J^T (a0 - g_vec), g_vec = (0, -g); angular a0 is zero
        gtz = a_tz + g
        gsz = a_sz + g
        h[0] += m_t * a_tx + m_s * a_sx
        h[1] += m_t * gtz + m_s * gsz
        h[2] += m_t * (t2x * a_tx + t2z * gtz) + m_s * (s2x * a_sx + s2z * gsz)
        h[ih] += m_t * (thx * a_tx + thz * gtz) + m_s * (shx * a_sx + shz * gsz)
        h[ik] += m_s * (skx * a_sx + skz * gsz)

        # --- foot point kinematics ---
        fx = hip_x + L1 * sat + L2 * sas
        fz = hip_z - L1 * cat - L2 * cas
        f2x = dhip_x + L1 * cat + L2 * cas
        f2z = dhip_z + L1 * sat + L2 * sas
        fhx = L1 * cat + L2 * cas
        fhz = L1 * sat + L2 * sas
        fkx = L2 * cas
        fkz = L2 * sas

        feet_pos[i, 0] = fx
        feet_pos[i, 1] = fz
        feet_jac[i, 0, 0] = 1.0
        feet_jac[i, 1, 1] = 1.0
        feet_jac[i, 0, 2] = f2x
        feet_jac[i, 1, 2] = f2z
        feet_jac[i, 0, ih] = fhx
        feet_jac[i, 1, ih] = fhz
        feet_jac[i, 0, ik] = fkx
        feet_jac[i, 1, ik] = fkz
        feet_vel[i, 0] = qdot[0] + f2x * phid + fhx * qhd + fkx * qkd
        feet_vel[i, 1] = qdot[1] + f2z * phid + fhz * qhd + fkz * qkd

    # symmetrize (only the upper triangle was filled)
    for a in range(N_Q):
        for b in range(a):
            M[a, b] = M[b, a]

    return M, h, feet_pos, feet_vel, feet_jac


@njit(cache=True)
def contact_force_1d(foot_x, foot_z, foot_vx, foot_vz,
                     anchor_on, anchor_x, cpar):
    """Penalty contact force for a single foot.

    Returns (fx, fz, new_anchor_on, new_anchor_x).
    """
    ground, kn, cn, kt, ct, mu = cpar[0], cpar[1], cpar[2], cpar[3], cpar[4], cpar[5]
    pen = ground - foot_z
    if pen <= 0.0:
        return 0.0, 0.0, 0, 0.0

    fn = kn * pen + cn * max(0.0, -foot_vz)
    if fn < 0.0:
        fn = 0.0
    if anchor_on == 0:
        anchor_x = foot_x
    ft = kt * (anchor_x - foot_x) - ct * foot_vx
    lim = mu * fn
    if ft > lim:
        ft = lim
        anchor_x = foot_x + ft / kt
    elif ft < -lim:
        ft = -lim
        anchor_x = foot_x + ft / kt
    return ft, fn, 1, anchor_x


@njit(cache=True)
def substeps(q, qdot, n_sub, dt, joint_tau, fext,
             anchor_on, anchor_x, par, cpar, lpar):
    """Advance (q, qdot) by n_sub semi-implicit Euler substeps of size dt.

    joint_tau is the already-clamped 8-vector of actuator torques, held
    constant over the substeps.  Mutates anchor_on / anchor_x in place and
    returns (q, qdot, power) where power is the mean over substeps of
    sum_j |tau_j * qdot_j| using the total applied joint torque.
    """
    hip_lo, hip_hi = lpar[0], lpar[1]
    knee_lo, knee_hi = lpar[2], lpar[3]
    k_lim, b_lim = lpar[4], lpar[5]

    q = q.copy()
    qdot = qdot.copy()
    power_acc = 0.0

    for _ in range(n_sub):
        M, h, feet_pos, feet_vel, feet_jac = kin_dyn(q, qdot, par)

        rhs = -h
        rhs[0] += fext[0]
        rhs[1] += fext[1]

        step_power = 0.0
        for j in range(8):
            idx = 3 + j
            tau = joint_tau[j]
            qj = q[idx]
            if j % 2 == 0:
                lo, hi = hip_lo, hip_hi
            else:
                lo, hi = knee_lo, knee_hi
            if qj > hi:
                tau += -k_lim * (qj - hi) - b_lim * qdot[idx]
            elif qj < lo:
                tau += -k_lim * (qj - lo) - b_lim * qdot[idx]
            rhs[idx] += tau
            step_power += abs(tau * qdot[idx])
        power_acc += step_power

        for i in range(N_LEGS):
            fx, fz, on, ax = contact_force_1d(
                feet_pos[i, 0], feet_pos[i, 1],
                feet_vel[i, 0], feet_vel[i, 1],
                anchor_on[i], anchor_x[i], cpar)
            anchor_on[i] = on
            anchor_x[i] = ax
            if on == 1:
                for a in range(N_Q):
                    rhs[a] += feet_jac[i, 0, a] * fx + feet_jac[i, 1, a] * fz

        qddot = np.linalg.solve(M, rhs)
        qdot = qdot + dt * qddot
        q = q + dt * qdot

    return q, qdot, power_acc / n_sub
