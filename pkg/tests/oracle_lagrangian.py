"""Independent Lagrangian oracle for the planar quadruped.

Re-derives body COM positions and velocities directly from the geometry
(no Jacobian accumulation, no shared code with the implementation) and
builds kinetic/potential energy, generalized momentum and bias forces from
them via direct evaluation and finite differences.
"""

import math

import numpy as np

from planarquad.dynamics import RobotModel


def body_states(model: RobotModel, q, qdot):
    """Per-body (mass, inertia, com_pos, com_vel, omega) for all 9 bodies."""
    m = model.segment_masses
    L1, L2 = model.thigh_length, model.shank_length
    Ib = m["body"] * (model.body_length**2 / 12 + model.body_radius**2 / 4)
    It = m["thigh"] * (L1**2 / 12 + model.thigh_radius**2 / 4)
    Is = m["shank"] * (L2**2 / 12 + model.shank_radius**2 / 4)

    x, z, phi = q[0], q[1], q[2]
    xd, zd, phid = qdot[0], qdot[1], qdot[2]
    out = [(m["body"], Ib, np.array([x, z]), np.array([xd, zd]), phid)]
    for i in range(4):
        ox = model.hip_offsets[i][0]
        qh, qk = q[3 + 2 * i], q[4 + 2 * i]
        qhd, qkd = qdot[3 + 2 * i], qdot[4 + 2 * i]
        hip = np.array([x + ox * math.cos(phi), z + ox * math.sin(phi)])
        hip_v = np.array([xd - ox * math.sin(phi) * phid,
                          zd + ox * math.cos(phi) * phid])
        at, atd = phi + qh, phid + qhd
        as_, asd = phi + qh + qk, phid + qhd + qkd
        dt_ = np.array([math.sin(at), -math.cos(at)])
        dt_p = np.array([math.cos(at), math.sin(at)])
        ds = np.array([math.sin(as_), -math.cos(as_)])
        ds_p = np.array([math.cos(as_), math.sin(as_)])
        thigh = hip + 0.5 * L1 * dt_
        thigh_v = hip_v + 0.5 * L1 * dt_p * atd
        shank = hip + L1 * dt_ + 0.5 * L2 * ds
        shank_v = hip_v + L1 * dt_p * atd + 0.5 * L2 * ds_p * asd
        out.append((m["thigh"], It, thigh, thigh_v, atd))
        out.append((m["shank"], Is, shank, shank_v, asd))
    return out


def kinetic_energy(model, q, qdot):
    return sum(0.5 * mb * vel @ vel + 0.5 * Ib * w * w
               for mb, Ib, _, vel, w in body_states(model, q, qdot))


def potential_energy(model, q):
    return model.gravity * sum(
        mb * pos[1] for mb, _, pos, _, _ in body_states(model, q, np.zeros(11)))


def mass_matrix(model, q):
    """M[a, b] from the bilinearity of T in qdot (exact, no FD)."""
    M = np.zeros((11, 11))
    for a in range(11):
        ea = np.zeros(11)
        ea[a] = 1.0
        sa = body_states(model, q, ea)
        for b in range(a, 11):
            eb = np.zeros(11)
            eb[b] = 1.0
            sb = body_states(model, q, eb)
            M[a, b] = sum(ma * va @ vb + Ia * wa * wb
                          for (ma, Ia, _, va, wa), (_, _, _, vb, wb)
                          in zip(sa, sb))
            M[b, a] = M[a, b]
    return M


def momentum(model, q, qdot):
    """p_i = dT/dqdot_i, exact via bilinearity of T."""
    states = body_states(model, q, qdot)
    p = np.zeros(11)
    for i in range(11):
        ei = np.zeros(11)
        ei[i] = 1.0
        unit = body_states(model, q, ei)
        p[i] = sum(mb * (vel @ uvel) + Ib * w * uw
                   for (mb, Ib, _, vel, w), (_, _, _, uvel, uw)
                   in zip(states, unit))
    return p


def bias_forces(model, q, qdot, eps: float = 1e-5):
    """h_i = sum_j d(p_i)/d(q_j) qdot_j - dT/dq_i + dV/dq_i (central FD in q)."""
    h = np.zeros(11)
    for i in range(11):
        pdot = 0.0
        for j in range(11):
            if qdot[j] == 0.0:
                continue
            qp, qm = q.copy(), q.copy()
            qp[j] += eps
            qm[j] -= eps
            dpi = (momentum(model, qp, qdot)[i]
                   - momentum(model, qm, qdot)[i]) / (2 * eps)
            pdot += dpi * qdot[j]
        qp, qm = q.copy(), q.copy()
        qp[i] += eps
        qm[i] -= eps
        dT = (kinetic_energy(model, qp, qdot)
              - kinetic_energy(model, qm, qdot)) / (2 * eps)
        dV = (potential_energy(model, qp)
              - potential_energy(model, qm)) / (2 * eps)
        h[i] = pdot - dT + dV
    return h
