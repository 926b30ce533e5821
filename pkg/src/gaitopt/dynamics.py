"""Planar floating-base dynamics of the lumped quadruped.

Generalized coordinates (7):

    q = [x, z, pitch, thigh_f, calf_f, thigh_r, calf_r]

``(x, z)`` is the torso geometric centre in the world sagittal plane, ``pitch``
is the counter-clockwise torso rotation (nose-up positive when heading +x).
Thigh angles are measured from the torso's downward vertical, calf angles
relative to the thigh; a link at absolute angle ``a`` points along
``(sin a, -cos a)``, so zero hangs straight down and positive swings the foot
forward.

Every point rigidly attached to the linkage (link COMs, knees, feet) can be
written as

    p(q) = (x, z) + sum_t  c_t * u(w_t . q + d_t),       u(a) = (sin a, -cos a)

with constant lever lengths ``c_t``, 0/1 angle-selection rows ``w_t`` and phase
offsets ``d_t``.  Since u' = (cos, sin), u'' = -u, u''' = -u', position
derivatives of any order are closed-form; the mass matrix, its configuration
gradients, Christoffel bias forces and all contact Jacobians below are exact
(validated against finite differences in the test suite).

Torque convention: inputs are per-motor torques of one leg of a pair; the
selection map applies a factor 2 because each lumped planar joint is driven by
both motors of its pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import RobotModel

NQ = 7
NU = 4
COORD_NAMES = ("x", "z", "pitch", "thigh_f", "calf_f", "thigh_r", "calf_r")
ACTUATED = (3, 4, 5, 6)


class Leg(enum.Enum):
    FRONT = "front"
    REAR = "rear"


class DegenerateContactError(RuntimeError):
    """Contact KKT system is singular for the named legs."""

    def __init__(self, legs):
        self.legs = tuple(legs)
        names = ", ".join(l.value for l in self.legs)
        super().__init__(f"degenerate contact for legs: {names}")


@dataclass(frozen=True)
class ContactSet:
    """Active stance legs with (optional) fixed world anchor points."""

    legs: tuple[Leg, ...] = ()
    anchors: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        order = {Leg.FRONT: 0, Leg.REAR: 1}
        if self.anchors:
            if len(self.anchors) != len(self.legs):
                raise ValueError("one anchor per stance leg required")
            pairs = sorted(zip(self.legs, self.anchors), key=lambda p: order[p[0]])
            object.__setattr__(self, "legs", tuple(p[0] for p in pairs))
            object.__setattr__(self, "anchors", tuple(tuple(p[1]) for p in pairs))
        else:
            legs = tuple(sorted(set(self.legs), key=lambda l: order[l]))
            object.__setattr__(self, "legs", legs)

    def __bool__(self):
        return bool(self.legs)

    def __contains__(self, leg):
        return leg in self.legs


# --------------------------------------------------------------------------
# attached-point kinematics


class AttachedPoint:
    """A point rigid in the linkage: base translation plus rotating levers."""

    def __init__(self, terms):
        terms = [t for t in terms if abs(t[0]) > 0.0]
        self.coeffs = np.array([t[0] for t in terms], dtype=float)
        self.weights = np.array([t[1] for t in terms], dtype=float).reshape(len(terms), NQ)
        self.phases = np.array([t[2] for t in terms], dtype=float)

    def _trig(self, q):
        ang = q @ self.weights.T + self.phases           # (..., T)
        s, c = np.sin(ang), np.cos(ang)
        u = np.stack([s, -c], axis=-1)                   # (..., T, 2)
        du = np.stack([c, s], axis=-1)
        return u, du

    def position(self, q):
        u, _ = self._trig(q)
        p = np.einsum("t,...ti->...i", self.coeffs, u)
        return p + q[..., :2]

    def jacobian(self, q):
        _, du = self._trig(q)
        jac = np.einsum("t,...ti,tj->...ij", self.coeffs, du, self.weights)
        jac[..., 0, 0] += 1.0
        jac[..., 1, 1] += 1.0
        return jac

    def jacobian_dq(self, q):
        """d/dq of the Jacobian; index order (..., point, j, k)."""
        u, _ = self._trig(q)
        return -np.einsum("t,...ti,tj,tk->...ijk", self.coeffs, u, self.weights, self.weights)

    def jacobian_dq2(self, q):
        _, du = self._trig(q)
        return -np.einsum(
            "t,...ti,tj,tk,tl->...ijkl", self.coeffs, du, self.weights, self.weights, self.weights
        )

    def velocity(self, q, qd):
        return np.einsum("...ij,...j->...i", self.jacobian(q), qd)

    def drift(self, q, qd):
        """Jdot * qdot, the acceleration of the point at zero q-acceleration."""
        return np.einsum("...ijk,...j,...k->...i", self.jacobian_dq(q), qd, qd)


def _axes(i, *more):
    w = np.zeros(NQ)
    for j in (i, *more):
        w[j] = 1.0
    return w

_HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class _Kinematics:
    points: dict
    link_masses: np.ndarray
    link_inertias: np.ndarray
    omega_rows: np.ndarray      # (5, NQ) angular-rate selection per link


@lru_cache(maxsize=8)
def _kin(model: RobotModel) -> _Kinematics:
    pitch = _axes(2)
    points = {}

    def lever(c, w, phase=0.0):
        return (c, w, phase)

    def frame_offset(ox, oz):
        # torso-frame offset (ox, oz) rotated by pitch
        return [lever(ox, pitch, _HALF_PI), lever(oz, pitch, np.pi)]

    torso_com = frame_offset(*model.torso_com)

    legs = {Leg.FRONT: (model.hip_x, _axes(2, 3), _axes(2, 3, 4)),
            Leg.REAR: (-model.hip_x, _axes(2, 5), _axes(2, 5, 6))}
    links = [("torso", AttachedPoint(torso_com), model.torso_mass, model.torso_inertia, pitch)]
    for leg, (hx, w_thigh, w_calf) in legs.items():
        hip = frame_offset(hx, model.hip_z)
        points[(leg, "hip")] = AttachedPoint(hip)
        thigh_com = AttachedPoint(hip + [lever(model.thigh_com, w_thigh)])
        calf_com = AttachedPoint(hip + [lever(model.thigh_length, w_thigh),
                                        lever(model.calf_com, w_calf)])
        points[(leg, "knee")] = AttachedPoint(hip + [lever(model.thigh_length, w_thigh)])
        points[(leg, "foot")] = AttachedPoint(hip + [lever(model.thigh_length, w_thigh),
                                                     lever(model.calf_length, w_calf)])
        links.append((f"{leg.value}_thigh", thigh_com, model.thigh_mass, model.thigh_inertia, w_thigh))
        links.append((f"{leg.value}_calf", calf_com, model.calf_mass, model.calf_inertia, w_calf))

    for name, pt, _, _, _ in links:
        points[("com", name)] = pt
    return _Kinematics(
        points=points,
        link_masses=np.array([l[2] for l in links]),
        link_inertias=np.array([l[3] for l in links]),
        omega_rows=np.stack([l[4] for l in links]),
    )


LINK_NAMES = ("torso", "front_thigh", "front_calf", "rear_thigh", "rear_calf")


def link_com_points(model):
    kin = _kin(model)
    return {name: kin.points[("com", name)] for name in LINK_NAMES}


def foot_point(model, leg: Leg) -> AttachedPoint:
    return _kin(model).points[(leg, "foot")]


def knee_point(model, leg: Leg) -> AttachedPoint:
    return _kin(model).points[(leg, "knee")]


# --------------------------------------------------------------------------
# mass matrix, bias forces and their configuration gradients


def mass_matrix(model, q):
    kin = _kin(model)
    q = np.asarray(q, dtype=float)
    M = np.zeros(q.shape[:-1] + (NQ, NQ))
    for m, I, w, name in zip(kin.link_masses, kin.link_inertias, kin.omega_rows, LINK_NAMES):
        J = kin.points[("com", name)].jacobian(q)
        M += m * np.einsum("...ki,...kj->...ij", J, J)
        M += I * np.einsum("i,j->ij", w, w)
    return M


def mass_matrix_dq(model, q):
    """dM/dq, indexed (..., i, j, k) = d M[i,j] / d q[k]."""
    kin = _kin(model)
    q = np.asarray(q, dtype=float)
    dM = np.zeros(q.shape[:-1] + (NQ, NQ, NQ))
    for m, name in zip(kin.link_masses, LINK_NAMES):
        pt = kin.points[("com", name)]
        J = pt.jacobian(q)
        dJ = pt.jacobian_dq(q)
        t = m * np.einsum("...kim,...kj->...ijm", dJ, J)
        dM += t + np.swapaxes(t, -3, -2)
    return dM


def _mass_matrix_dq2(model, q):
    kin = _kin(model)
    q = np.asarray(q, dtype=float)
    d2M = np.zeros(q.shape[:-1] + (NQ, NQ, NQ, NQ))
    for m, name in zip(kin.link_masses, LINK_NAMES):
        pt = kin.points[("com", name)]
        J = pt.jacobian(q)
        dJ = pt.jacobian_dq(q)
        d2J = pt.jacobian_dq2(q)
        t = m * np.einsum("...kimn,...kj->...ijmn", d2J, J)
        d2M += t + np.swapaxes(t, -4, -3)
        d2M += m * (np.einsum("...kim,...kjn->...ijmn", dJ, dJ)
                    + np.einsum("...kin,...kjm->...ijmn", dJ, dJ))
    return d2M


def gravity_vector(model, q):
    kin = _kin(model)
    q = np.asarray(q, dtype=float)
    G = np.zeros(q.shape[:-1] + (NQ,))
    for m, name in zip(kin.link_masses, LINK_NAMES):
        G += m * model.gravity * kin.points[("com", name)].jacobian(q)[..., 1, :]
    return G


def coriolis_matrix(model, q, qd):
    """Christoffel-symbol Coriolis matrix; Mdot - 2C is skew-symmetric."""
    dM = mass_matrix_dq(model, q)
    qd = np.asarray(qd, dtype=float)
    return 0.5 * (np.einsum("...ijk,...k->...ij", dM, qd)
                  + np.einsum("...ikj,...k->...ij", dM, qd)
                  - np.einsum("...jki,...k->...ij", dM, qd))


def bias_forces(model, q, qd):
    """h(q, qd) = C(q, qd) qd + G(q)."""
    dM = mass_matrix_dq(model, q)
    qd = np.asarray(qd, dtype=float)
    quad = (np.einsum("...ijk,...j,...k->...i", dM, qd, qd)
            - 0.5 * np.einsum("...jki,...j,...k->...i", dM, qd, qd))
    return quad + gravity_vector(model, q)


def bias_derivatives(model, q, qd):
    """Gradients (dh/dq, dh/dqd) of the bias force vector."""
    kin = _kin(model)
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    d2M = _mass_matrix_dq2(model, q)
    dh_dq = (np.einsum("...ijkl,...j,...k->...il", d2M, qd, qd)
             - 0.5 * np.einsum("...jkil,...j,...k->...il", d2M, qd, qd))
    for m, name in zip(kin.link_masses, LINK_NAMES):
        dh_dq += m * model.gravity * kin.points[("com", name)].jacobian_dq(q)[..., 1, :, :]
    dh_dqd = 2.0 * coriolis_matrix(model, q, qd)
    return dh_dq, dh_dqd


def actuation_matrix(model) -> np.ndarray:
    """Maps per-motor torques of each pair onto the actuated coordinates."""
    S = np.zeros((NQ, NU))
    for col, coord in enumerate(ACTUATED):
        S[coord, col] = 2.0
    return S


def kinetic_energy(model, q, qd):
    M = mass_matrix(model, q)
    return 0.5 * np.einsum("...i,...ij,...j->...", qd, M, qd)


def potential_energy(model, q):
    kin = _kin(model)
    q = np.asarray(q, dtype=float)
    V = np.zeros(q.shape[:-1])
    for m, name in zip(kin.link_masses, LINK_NAMES):
        V += m * model.gravity * kin.points[("com", name)].position(q)[..., 1]
    return V


def total_energy(model, q, qd):
    return kinetic_energy(model, q, qd) + potential_energy(model, q)


# --------------------------------------------------------------------------
# contact kinematics, constrained dynamics, impacts


def contact_kinematics(model, q, qd, leg: Leg):
    """Foot position, contact Jacobian and drift Jdot*qdot for one leg."""
    pt = foot_point(model, leg)
    return pt.position(q), pt.jacobian(q), pt.drift(q, qd)


def contact_jacobian(model, q, legs) -> np.ndarray:
    """Stacked (2 * len(legs), ..., NQ -> ...) contact Jacobian."""
    rows = [foot_point(model, leg).jacobian(q) for leg in legs]
    return np.concatenate(rows, axis=-2)


def _stance_rhs_blocks(model, q, qd, legs):
    Js, drifts = [], []
    for leg in legs:
        pt = foot_point(model, leg)
        Js.append(pt.jacobian(q))
        drifts.append(pt.drift(q, qd))
    return np.concatenate(Js, axis=-2), np.concatenate(drifts, axis=-1)


def constrained_accel(model, q, qd, tau, contacts: ContactSet,
                      baumgarte: float = 0.0):
    """Forward dynamics under the active contact constraints.

    Solves the stance KKT system for the joint accelerations and the ground
    reaction forces (pair totals, one [fx, fz] per stance leg).  ``baumgarte``
    adds constraint stabilization with both poles at the given rate; anchors
    must be set on the contact set for the position term to be active.
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    tau = np.asarray(tau, dtype=float)
    M = mass_matrix(model, q)
    h = bias_forces(model, q, qd)
    rhs_top = actuation_matrix(model) @ tau - h

    if not contacts:
        return np.linalg.solve(M, rhs_top), {}

    legs = contacts.legs
    J, drift = _stance_rhs_blocks(model, q, qd, legs)
    nc = J.shape[0]
    correction = -drift
    if baumgarte > 0.0:
        vel = np.concatenate([foot_point(model, leg).velocity(q, qd) for leg in legs])
        correction -= 2.0 * baumgarte * vel
        if contacts.anchors:
            pos = np.concatenate([foot_point(model, leg).position(q) for leg in legs])
            anchors = np.concatenate([np.asarray(a, dtype=float) for a in contacts.anchors])
            correction -= baumgarte**2 * (pos - anchors)

    kkt = np.zeros((NQ + nc, NQ + nc))
    kkt[:NQ, :NQ] = M
    kkt[:NQ, NQ:] = -J.T
    kkt[NQ:, :NQ] = J
    rhs = np.concatenate([rhs_top, correction])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateContactError(legs) from None
    if not np.all(np.isfinite(sol)):
        raise DegenerateContactError(legs)
    qdd = sol[:NQ]
    forces = {leg: sol[NQ + 2 * i: NQ + 2 * i + 2] for i, leg in enumerate(legs)}
    return qdd, forces


def contact_forces(model, q, qd, tau, contacts: ContactSet):
    _, forces = constrained_accel(model, q, qd, tau, contacts)
    return forces


def impact_map(model, q, qd_minus, contacts: ContactSet):
    """Plastic impact: post-impact velocities and per-leg impulses.

    Solves [M, -J^T; J, 0] [qd+; imp] = [M qd-; 0] for the contact set active
    immediately after the impact, so feet that stay in stance through the
    event keep zero velocity as well.
    """
    if not contacts:
        raise ValueError("impact requires a nonempty contact set")
    q = np.asarray(q, dtype=float)
    qd_minus = np.asarray(qd_minus, dtype=float)
    M = mass_matrix(model, q)
    J = contact_jacobian(model, q, contacts.legs)
    nc = J.shape[0]
    kkt = np.zeros((NQ + nc, NQ + nc))
    kkt[:NQ, :NQ] = M
    kkt[:NQ, NQ:] = -J.T
    kkt[NQ:, :NQ] = J
    rhs = np.concatenate([M @ qd_minus, np.zeros(nc)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        raise DegenerateContactError(contacts.legs) from None
    qd_plus = sol[:NQ]
    impulses = {leg: sol[NQ + 2 * i: NQ + 2 * i + 2] for i, leg in enumerate(contacts.legs)}
    return qd_plus, impulses


def reset_matrix(model, q, legs) -> np.ndarray:
    """Linear map P with qd+ = P qd- for a plastic impact on ``legs``."""
    if not legs:
        return np.eye(NQ)
    M = mass_matrix(model, q)
    J = contact_jacobian(model, q, legs)
    Minv_Jt = np.linalg.solve(M, J.T)
    G = J @ Minv_Jt
    return np.eye(NQ) - Minv_Jt @ np.linalg.solve(G, J)


def reset_matrix_dq(model, q, legs) -> np.ndarray:
    """dP/dq with index order (i, j, k) = d P[i,j] / d q[k]."""
    if not legs:
        return np.zeros((NQ, NQ, NQ))
    M = mass_matrix(model, q)
    dM = mass_matrix_dq(model, q)
    J = contact_jacobian(model, q, legs)
    dJ = np.concatenate([foot_point(model, leg).jacobian_dq(q) for leg in legs], axis=0)
    Minv = np.linalg.inv(M)
    A = Minv @ J.T
    G = J @ A
    Ginv = np.linalg.inv(G)
    dP = np.zeros((NQ, NQ, NQ))
    for k in range(NQ):
        dMinv = -Minv @ dM[:, :, k] @ Minv
        dA = dMinv @ J.T + Minv @ dJ[:, :, k].T
        dG = dJ[:, :, k] @ A + J @ dA
        dGinv = -Ginv @ dG @ Ginv
        dP[:, :, k] = -(dA @ Ginv @ J + A @ dGinv @ J + A @ Ginv @ dJ[:, :, k])
    return dP


# --------------------------------------------------------------------------
# batched quantities for the transcription


def accel_explicit(model, q, qd, tau, lam, legs):
    """Batched accelerations with contact forces given as inputs.

    a = M(q)^-1 (S tau + sum_i J_i^T lam_i - h); ``lam`` has shape
    (..., 2 * len(legs)) stacked in leg order and may be empty.
    """
    M = mass_matrix(model, q)
    rhs = np.einsum("ij,...j->...i", actuation_matrix(model), tau) - bias_forces(model, q, qd)
    if legs:
        J = contact_jacobian(model, q, legs)
        rhs = rhs + np.einsum("...ji,...j->...i", J, lam)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def accel_derivatives(model, q, qd, tau, lam, legs):
    """Batched acceleration plus gradients wrt (q, qd, tau, lam)."""
    S = actuation_matrix(model)
    M = mass_matrix(model, q)
    dM = mass_matrix_dq(model, q)
    h = bias_forces(model, q, qd)
    dh_dq, dh_dqd = bias_derivatives(model, q, qd)
    rhs = np.einsum("ij,...j->...i", S, tau) - h
    drhs_dq = -dh_dq
    if legs:
        J = contact_jacobian(model, q, legs)
        dJ = np.concatenate([foot_point(model, leg).jacobian_dq(q) for leg in legs], axis=-3)
        rhs = rhs + np.einsum("...ji,...j->...i", J, lam)
        drhs_dq = drhs_dq + np.einsum("...jik,...j->...ik", dJ, lam)
    a = np.linalg.solve(M, rhs[..., None])[..., 0]
    # d(M^-1 r)/dx = M^-1 (dr/dx - dM/dx a)
    da_dq = np.linalg.solve(M, drhs_dq - np.einsum("...ijk,...j->...ik", dM, a))
    da_dqd = np.linalg.solve(M, -dh_dqd)
    da_dtau = np.linalg.solve(M, np.broadcast_to(S, M.shape[:-2] + S.shape).copy())
    if legs:
        da_dlam = np.linalg.solve(M, np.swapaxes(J, -1, -2))
    else:
        da_dlam = np.zeros(M.shape[:-2] + (NQ, 0))
    return a, da_dq, da_dqd, da_dtau, da_dlam
