"""Gait post-processing: transport cost, work ledgers, momentum traces.

All quantities are reported for the full planar robot, i.e. leg pairs count
twice: the torque decision variables are per motor, so instantaneous actuator
power is ``2 * tau * qd`` summed over the four lumped joints.

Sign conventions: positive mechanical work accelerates the joint along its
torque; the angular-momentum traces are positive for clockwise rotation in
the x-z plane (nose-down pitching when walking toward +x), which matches the
usual presentation for sagittal gaits.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import NQ, Leg, link_com_points, LINK_NAMES
from .gaits import HybridGait, gait_by_name

_LEG_JOINTS = {Leg.FRONT: (3, 4), Leg.REAR: (5, 6)}
JOINT_NAMES = ("thigh_front", "calf_front", "thigh_rear", "calf_rear")
_LEG_LINKS = {Leg.FRONT: ("front_thigh", "front_calf"),
              Leg.REAR: ("rear_thigh", "rear_calf")}


@dataclass
class WorkLedger:
    positive: float = 0.0
    negative: float = 0.0

    @property
    def net(self):
        return self.positive + self.negative

    @property
    def total_magnitude(self):
        return self.positive - self.negative

    def add(self, p, n):
        self.positive += p
        self.negative += n


@dataclass
class GaitMetrics:
    """Headline numbers of one periodic gait."""

    gait: str
    speed: float                 # realized average speed, m/s
    stride_length: float
    stride_time: float
    stride_frequency: float
    duty_factor: float           # fraction of the cycle with any ground contact
    duty_factor_per_leg: dict
    cost_of_transport: float
    actuator_work: WorkLedger
    work_by_phase: dict          # (leg, "stance"/"swing") -> WorkLedger
    work_by_joint: dict          # (joint name, "stance"/"swing") -> WorkLedger
    peak_torque: float
    peak_joint_speed: float
    peak_force: float            # max vertical contact force seen (pair total)
    apex_height: float

    def as_row(self):
        """Flat dict for delimited output."""
        row = dict(
            gait=self.gait, speed=self.speed, stride_length=self.stride_length,
            stride_time=self.stride_time, stride_frequency=self.stride_frequency,
            duty_factor=self.duty_factor,
            duty_factor_front=self.duty_factor_per_leg[Leg.FRONT],
            duty_factor_rear=self.duty_factor_per_leg[Leg.REAR],
            cost_of_transport=self.cost_of_transport,
            work_positive=self.actuator_work.positive,
            work_negative=self.actuator_work.negative,
            peak_torque=self.peak_torque, peak_joint_speed=self.peak_joint_speed,
            peak_force=self.peak_force, apex_height=self.apex_height,
        )
        for (leg, phase), ledger in sorted(self.work_by_phase.items(),
                                           key=lambda kv: (kv[0][0].value, kv[0][1])):
            row[f"work_{leg.value}_{phase}_pos"] = ledger.positive
            row[f"work_{leg.value}_{phase}_neg"] = ledger.negative
        for (joint, phase), ledger in sorted(self.work_by_joint.items()):
            row[f"work_{joint}_{phase}_pos"] = ledger.positive
            row[f"work_{joint}_{phase}_neg"] = ledger.negative
        return row


def _records(gait, obj):
    """Normalize solved plans and simulations to (t, q, v, tau, contacts)."""
    domains = getattr(obj, "domains")
    for d, traj in enumerate(domains):
        dom = gait.domains[d % gait.n_domains]
        n = traj.q.shape[0]
        if hasattr(traj, "t"):
            t = np.asarray(traj.t) - traj.t[0]
        else:
            t = np.linspace(0.0, traj.duration, n)
        yield t, traj.q, traj.v, traj.tau, dom.contacts


def compute_metrics(model, obj, gait: HybridGait = None) -> GaitMetrics:
    """Metrics from either a solved plan or a completed simulation."""
    gait = gait or gait_by_name(obj.gait_name)
    total_T = 0.0
    stance_T = {leg: 0.0 for leg in Leg}
    contact_T = 0.0
    cot_num = 0.0
    total = WorkLedger()
    by_phase = {(leg, ph): WorkLedger() for leg in Leg for ph in ("stance", "swing")}
    by_joint = {(j, ph): WorkLedger() for j in JOINT_NAMES for ph in ("stance", "swing")}
    peak_tau = 0.0
    peak_qd = 0.0
    peak_f = 0.0
    apex = -np.inf
    x0 = None
    x1 = None

    for t, q, v, tau, contacts in _records(gait, obj):
        T = t[-1] - t[0]
        total_T += T
        contact_T += T if contacts else 0.0
        apex = max(apex, float(q[:, 1].max()))
        if x0 is None:
            x0 = q[0, 0]
        x1 = q[-1, 0]
        power = 2.0 * tau * v[:, 3:]                       # (n, 4) pair power
        cot_num += np.trapezoid(np.abs(power).sum(axis=1), t)
        peak_tau = max(peak_tau, float(np.abs(tau).max()))
        peak_qd = max(peak_qd, float(np.abs(v[:, 3:]).max()))
        for leg in Leg:
            cols = list(_LEG_JOINTS[leg])
            phase = "stance" if leg in contacts else "swing"
            p_leg = 0.0
            for c in cols:
                p_j = power[:, c - 3]
                pos_j = np.trapezoid(np.maximum(p_j, 0.0), t)
                neg_j = np.trapezoid(np.minimum(p_j, 0.0), t)
                by_joint[(JOINT_NAMES[c - 3], phase)].add(pos_j, neg_j)
                p_leg = p_leg + p_j
            pos = np.trapezoid(np.maximum(p_leg, 0.0), t)
            neg = np.trapezoid(np.minimum(p_leg, 0.0), t)
            by_phase[(leg, phase)].add(pos, neg)
            total.add(pos, neg)
            if leg in contacts:
                stance_T[leg] += T
    for dom in obj.domains:
        lam = getattr(dom, "lam", None)
        if lam is not None and lam.size:
            peak_f = max(peak_f, float(lam[:, 1::2].max()))
        fdict = getattr(dom, "forces", None)
        if fdict:
            for f in fdict.values():
                peak_f = max(peak_f, float(f[:, 1].max()))

    stride = float(x1 - x0)
    speed = stride / total_T if total_T else np.nan
    return GaitMetrics(
        gait=obj.gait_name,
        speed=speed,
        stride_length=stride,
        stride_time=total_T,
        stride_frequency=1.0 / total_T if total_T else np.nan,
        duty_factor=contact_T / total_T if total_T else np.nan,
        duty_factor_per_leg={leg: stance_T[leg] / total_T for leg in Leg},
        cost_of_transport=cot_num / (model.weight * stride) if stride else np.nan,
        actuator_work=total,
        work_by_phase=by_phase,
        work_by_joint=by_joint,
        peak_torque=peak_tau,
        peak_joint_speed=peak_qd,
        peak_force=peak_f,
        apex_height=apex,
    )


# --------------------------------------------------------------------------
# angular momentum about the moving center of mass


def center_of_mass(model, q, v=None):
    """COM position (and velocity when ``v`` given); batched over leading axes."""
    pts = link_com_points(model)
    masses = model.link_masses()
    mtot = sum(masses.values())
    q = np.asarray(q, dtype=float)
    com = sum(masses[n] * pts[n].position(q) for n in LINK_NAMES) / mtot
    if v is None:
        return com
    vcom = sum(masses[n] * pts[n].velocity(q, v) for n in LINK_NAMES) / mtot
    return com, vcom


_GROUPS = {
    "torso": ("torso",),
    "front_legs": _LEG_LINKS[Leg.FRONT],
    "rear_legs": _LEG_LINKS[Leg.REAR],
}

_OMEGA_COLS = {
    "torso": (2,),
    "front_thigh": (2, 3),
    "front_calf": (2, 3, 4),
    "rear_thigh": (2, 5),
    "rear_calf": (2, 5, 6),
}


def angular_momentum(model, q, v):
    """Clockwise-positive angular momentum about the COM, per body group.

    Returns a dict with keys ``torso``, ``front_legs``, ``rear_legs`` and
    ``total``, each shaped like the leading axes of ``q``.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    pts = link_com_points(model)
    masses = model.link_masses()
    inertias = dict(zip(LINK_NAMES, (model.torso_inertia, model.thigh_inertia,
                                     model.calf_inertia, model.thigh_inertia,
                                     model.calf_inertia)))
    com, vcom = center_of_mass(model, q, v)
    out = {}
    for group, links in _GROUPS.items():
        L = np.zeros(q.shape[:-1])
        for name in links:
            r = pts[name].position(q) - com
            u = pts[name].velocity(q, v) - vcom
            omega = v[..., list(_OMEGA_COLS[name])].sum(axis=-1)
            L = L + masses[name] * (r[..., 0] * u[..., 1] - r[..., 1] * u[..., 0])
            L = L + inertias[name] * omega
        out[group] = -L            # clockwise positive
    out["total"] = out["torso"] + out["front_legs"] + out["rear_legs"]
    return out


def momentum_trace(model, obj, gait: HybridGait = None):
    """Stacked (t, group traces) over all domains of a plan or simulation."""
    gait = gait or gait_by_name(obj.gait_name)
    ts, rows = [], []
    offset = 0.0
    for t, q, v, tau, contacts in _records(gait, obj):
        L = angular_momentum(model, q, v)
        ts.append(offset + t)
        rows.append(L)
        offset += t[-1] - t[0]
    t_all = np.concatenate(ts)
    merged = {k: np.concatenate([r[k] for r in rows]) for k in rows[0]}
    return t_all, merged
