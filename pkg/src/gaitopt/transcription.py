"""Trapezoidal direct collocation over a gait's contact sequence.

Every contact domain of the hybrid cycle is discretized on ``N`` equal
intervals of its (free) duration.  The stacked decision vector holds, per
domain and in one contiguous block,

    [ T | q (N+1 x 7) | v (N+1 x 7) | tau (N+1 x 4) | lam (N+1 x 2c) | B (4 x 6) ]

with ``c`` stance legs and one degree-5 Bezier row per actuated joint.
Transitions impose configuration continuity and the plastic-impact velocity
reset; the cycle closes on itself with the horizontal base position exempted
(one stride of forward travel) and gauge-fixed to start at x = 0.

All constraint Jacobians are analytic and assembled as triplets with a fixed,
value-independent sparsity pattern.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import bezier
from .dynamics import (
    NQ,
    NU,
    Leg,
    accel_derivatives,
    accel_explicit,
    actuation_matrix,
    bias_forces,
    contact_jacobian,
    foot_point,
    gravity_vector,
    mass_matrix,
    reset_matrix,
    reset_matrix_dq,
)
from .gaits import EventType, HybridGait

_TRAP_W = None  # set per-domain; endpoint weights 1/2


@dataclass(frozen=True)
class TranscriptionOptions:
    """Grid resolution, physical margins and box bounds of the NLP."""

    speed: float = 2.0
    nodes: int = 10                      # intervals per domain
    clearance_min: float = 1e-3          # swing foot height, deep swing
    clearance_edge: float = 1e-4         # swing foot height near lift/land
    stride_min: float = 0.01
    td_vx_max: float = 0.3               # |foot vx| at touchdown
    td_vz_min: float = -1.5              # foot vz at touchdown in [td_vz_min, 0]
    smooth_eps: float = 1e-4             # |.| smoothing in the work integrand
    duration_range: tuple = (0.01, 0.8)
    base_x_range: tuple = (-5.0, 50.0)
    base_z_range: tuple = (0.08, 0.8)
    pitch_range: tuple = (-1.2, 1.2)
    base_vx_range: tuple = (-5.0, 10.0)
    base_vz_range: tuple = (-6.0, 6.0)
    pitch_rate_range: tuple = (-25.0, 25.0)
    force_max: float = 800.0
    bezier_margin: float = 0.3


@dataclass
class DomainTraj:
    """Dense node trajectories of one contact domain."""

    duration: float
    q: np.ndarray        # (N+1, 7)
    v: np.ndarray        # (N+1, 7)
    tau: np.ndarray      # (N+1, 4)
    lam: np.ndarray      # (N+1, 2c)
    coeffs: np.ndarray   # (4, 6) Bezier control values


@dataclass
class GaitSolution:
    """A solved periodic gait: per-domain trajectories plus headline data."""

    gait_name: str
    speed: float
    domains: list
    objective: float = np.nan
    eq_violation: float = np.nan
    ineq_violation: float = np.nan
    status: str = ""

    @property
    def cycle_duration(self):
        return float(sum(d.duration for d in self.domains))

    @property
    def stride_length(self):
        return float(self.domains[-1].q[-1, 0] - self.domains[0].q[0, 0])


class _DomainMeta:
    """Index bookkeeping for one domain's slice of the decision vector."""

    def __init__(self, base, N, contacts):
        self.N = N
        self.contacts = contacts
        self.nc = 2 * len(contacts)
        self.base = base
        n1 = N + 1
        self.off_T = base
        self.off_q = base + 1
        self.off_v = self.off_q + n1 * NQ
        self.off_tau = self.off_v + n1 * NQ
        self.off_lam = self.off_tau + n1 * NU
        self.off_B = self.off_lam + n1 * self.nc
        self.end = self.off_B + NU * (bezier.DEGREE + 1)

    def q(self, k):
        return self.off_q + k * NQ

    def v(self, k):
        return self.off_v + k * NQ

    def tau(self, k):
        return self.off_tau + k * NU

    def lam(self, k):
        return self.off_lam + k * self.nc

    def slices(self):
        n1 = self.N + 1
        return dict(
            T=self.off_T,
            q=slice(self.off_q, self.off_q + n1 * NQ),
            v=slice(self.off_v, self.off_v + n1 * NQ),
            tau=slice(self.off_tau, self.off_tau + n1 * NU),
            lam=slice(self.off_lam, self.off_lam + n1 * self.nc),
            B=slice(self.off_B, self.end),
        )


class Transcription:
    """Sparse NLP for one periodic gait at a target average speed."""

    def __init__(self, model, gait: HybridGait, options: TranscriptionOptions = None):
        self.model = model
        self.gait = gait
        self.options = options or TranscriptionOptions()
        N = self.options.nodes
        if N < 2:
            raise ValueError("need at least 2 intervals per domain")

        self.domains = []
        base = 0
        for dom in gait.domains:
            meta = _DomainMeta(base, N, dom.contacts)
            self.domains.append(meta)
            base = meta.end
        self.n = base

        s = np.linspace(0.0, 1.0, N + 1)
        self.phases = s
        self.basis = bezier.basis(s)                       # (N+1, 6)
        w = np.ones(N + 1)
        w[0] = w[-1] = 0.5
        self.trap_w = w

        self._build_constraint_index()
        self._build_bounds()

    # ------------------------------------------------------------------
    # layout helpers

    def pack(self, trajs) -> np.ndarray:
        z = np.zeros(self.n)
        for meta, tr in zip(self.domains, trajs):
            sl = meta.slices()
            z[sl["T"]] = tr.duration
            z[sl["q"]] = np.asarray(tr.q, dtype=float).ravel()
            z[sl["v"]] = np.asarray(tr.v, dtype=float).ravel()
            z[sl["tau"]] = np.asarray(tr.tau, dtype=float).ravel()
            if meta.nc:
                z[sl["lam"]] = np.asarray(tr.lam, dtype=float).ravel()
            z[sl["B"]] = np.asarray(tr.coeffs, dtype=float).ravel()
        return z

    def unpack(self, z):
        out = []
        for meta in self.domains:
            sl = meta.slices()
            n1 = meta.N + 1
            out.append(DomainTraj(
                duration=float(z[sl["T"]]),
                q=z[sl["q"]].reshape(n1, NQ).copy(),
                v=z[sl["v"]].reshape(n1, NQ).copy(),
                tau=z[sl["tau"]].reshape(n1, NU).copy(),
                lam=z[sl["lam"]].reshape(n1, meta.nc).copy(),
                coeffs=z[sl["B"]].reshape(NU, bezier.DEGREE + 1).copy(),
            ))
        return out

    def solution(self, z, status="") -> GaitSolution:
        eq = self.eq_residual(z)
        g = self.ineq_residual(z)
        return GaitSolution(
            gait_name=self.gait.name,
            speed=self.options.speed,
            domains=self.unpack(z),
            objective=float(self.objective(z)),
            eq_violation=float(np.abs(eq).max()) if eq.size else 0.0,
            ineq_violation=float(np.maximum(g, 0.0).max()) if g.size else 0.0,
            status=status,
        )

    # ------------------------------------------------------------------
    # constraint catalogue

    def _build_constraint_index(self):
        N = self.options.nodes
        gait, eq, ineq = self.gait, [], []

        def add(target, name, rows):
            start = target[-1][2] if target else 0
            target.append((name, start, start + rows))

        for d, (meta, dom) in enumerate(zip(self.domains, gait.domains)):
            add(eq, f"defect_q[{d}]", N * NQ)
            add(eq, f"defect_v[{d}]", N * NQ)
            if meta.nc:
                add(eq, f"contact_vel[{d}]", N * meta.nc)
            td = gait.touchdown_legs(d)
            if td:
                add(eq, f"anchor[{d}]", len(td))
            add(eq, f"virtual[{d}]", (N + 1) * NU)
        for t, tr in enumerate(gait.transitions):
            closure = t == len(gait.transitions) - 1
            add(eq, f"q_cont[{t}]", NQ - 1 if closure else NQ)
            add(eq, f"v_reset[{t}]", NQ)
        add(eq, "speed", 1)
        self.eq_index = eq
        self.n_eq = eq[-1][2]

        self._clearance_nodes = []
        for d, (meta, dom) in enumerate(zip(self.domains, gait.domains)):
            if meta.nc:
                add(ineq, f"friction[{d}]", (N + 1) * meta.nc)
            spec = self._swing_clearance_spec(d)
            self._clearance_nodes.append(spec)
            if spec:
                add(ineq, f"clearance[{d}]", len(spec))
        for t, tr in enumerate(gait.transitions):
            if tr.event is EventType.TOUCHDOWN:
                add(ineq, f"td_vel[{t}]", 4 * len(tr.legs))
        add(ineq, "stride", 1)
        self.ineq_index = ineq
        self.n_ineq = ineq[-1][2]

    def _swing_clearance_spec(self, d):
        """(leg, node, threshold) rows for feet in the air during domain d."""
        gait, N = self.gait, self.options.nodes
        dom = gait.domains[d]
        prev = gait.domains[(d - 1) % gait.n_domains]
        exit_tr = gait.transitions[d]
        spec = []
        for leg in Leg:
            if leg in dom.contacts:
                continue
            zero_entry = leg in prev.contacts
            zero_exit = exit_tr.event is EventType.TOUCHDOWN and leg in exit_tr.legs
            for k in range(N + 1):
                if (k == 0 and zero_entry) or (k == N and zero_exit):
                    continue
                dist = N + 1
                if zero_entry:
                    dist = min(dist, k)
                if zero_exit:
                    dist = min(dist, N - k)
                thr = self.options.clearance_min if dist >= 2 else self.options.clearance_edge
                spec.append((leg, k, thr))
        return spec

    def constraint_slice(self, name, kind="eq"):
        for nm, a, b in (self.eq_index if kind == "eq" else self.ineq_index):
            if nm == name:
                return slice(a, b)
        raise KeyError(name)

    # ------------------------------------------------------------------
    # bounds

    def _build_bounds(self):
        o = self.options
        m = self.model
        lb = np.full(self.n, -np.inf)
        ub = np.full(self.n, np.inf)
        q_lb = np.array([o.base_x_range[0], o.base_z_range[0], o.pitch_range[0],
                         m.thigh_limits[0], m.calf_limits[0],
                         m.thigh_limits[0], m.calf_limits[0]])
        q_ub = np.array([o.base_x_range[1], o.base_z_range[1], o.pitch_range[1],
                         m.thigh_limits[1], m.calf_limits[1],
                         m.thigh_limits[1], m.calf_limits[1]])
        v_lim = m.velocity_limit
        v_lb = np.array([o.base_vx_range[0], o.base_vz_range[0], o.pitch_rate_range[0],
                         -v_lim, -v_lim, -v_lim, -v_lim])
        v_ub = np.array([o.base_vx_range[1], o.base_vz_range[1], o.pitch_rate_range[1],
                         v_lim, v_lim, v_lim, v_lim])
        b_lb = np.array([m.thigh_limits[0], m.calf_limits[0],
                         m.thigh_limits[0], m.calf_limits[0]]) - o.bezier_margin
        b_ub = np.array([m.thigh_limits[1], m.calf_limits[1],
                         m.thigh_limits[1], m.calf_limits[1]]) + o.bezier_margin

        for d, meta in enumerate(self.domains):
            n1 = meta.N + 1
            sl = meta.slices()
            lb[sl["T"]], ub[sl["T"]] = o.duration_range
            lb[sl["q"]] = np.tile(q_lb, n1)
            ub[sl["q"]] = np.tile(q_ub, n1)
            lb[sl["v"]] = np.tile(v_lb, n1)
            ub[sl["v"]] = np.tile(v_ub, n1)
            lb[sl["tau"]] = -m.motor_torque_limit
            ub[sl["tau"]] = m.motor_torque_limit
            if meta.nc:
                lam_lb = np.tile([-o.force_max, 0.0], len(meta.contacts))
                lam_ub = np.tile([o.force_max, o.force_max], len(meta.contacts))
                lb[sl["lam"]] = np.tile(lam_lb, n1)
                ub[sl["lam"]] = np.tile(lam_ub, n1)
                tr = self.gait.transitions[d]
                if tr.event is EventType.LIFTOFF:
                    for leg in tr.legs:
                        i = meta.contacts.index(leg)
                        a = meta.lam(meta.N) + 2 * i
                        lb[a:a + 2] = 0.0
                        ub[a:a + 2] = 0.0
            lb[sl["B"]] = np.repeat(b_lb, bezier.DEGREE + 1)
            ub[sl["B"]] = np.repeat(b_ub, bezier.DEGREE + 1)

        # gauge: the cycle starts at x = 0
        x0 = self.domains[0].q(0)
        lb[x0] = ub[x0] = 0.0
        self.lb, self.ub = lb, ub

    def variable_scales(self):
        """Natural magnitudes per variable, for diagonal NLP scaling."""
        s = np.ones(self.n)
        for meta in self.domains:
            sl = meta.slices()
            s[sl["T"]] = 0.1
            s[sl["q"]] = 1.0
            s[sl["v"]] = 5.0
            s[sl["tau"]] = self.model.motor_torque_limit
            if meta.nc:
                s[sl["lam"]] = self.model.weight
            s[sl["B"]] = 1.0
        return s

    # ------------------------------------------------------------------
    # evaluation helpers

    def _domain_arrays(self, z, meta):
        sl = meta.slices()
        n1 = meta.N + 1
        return (float(z[sl["T"]]),
                z[sl["q"]].reshape(n1, NQ),
                z[sl["v"]].reshape(n1, NQ),
                z[sl["tau"]].reshape(n1, NU),
                z[sl["lam"]].reshape(n1, meta.nc),
                z[sl["B"]].reshape(NU, bezier.DEGREE + 1))

    # ------------------------------------------------------------------
    # objective: mechanical work per weight-distance

    def _work_terms(self, z):
        eps = self.options.smooth_eps
        per_domain = []
        for meta in self.domains:
            T, q, v, tau, lam, B = self._domain_arrays(z, meta)
            p = tau * v[:, 3:]                               # per-motor power
            sab = np.sqrt(p * p + eps * eps)
            integ = 2.0 * sab.sum(axis=1)                    # pair multiplicity
            per_domain.append((T, q, v, tau, p, sab, integ))
        return per_domain

    def _distance(self, z):
        last = self.domains[-1]
        return z[last.q(last.N)] - z[self.domains[0].q(0)]

    def objective(self, z):
        num = sum(T / m.N * (self.trap_w @ integ)
                  for m, (T, *_, integ) in zip(self.domains, self._work_terms(z)))
        den = self.model.weight * self._distance(z)
        return num / den

    def gradient(self, z):
        g = np.zeros(self.n)
        terms = self._work_terms(z)
        num = sum(T / m.N * (self.trap_w @ integ) for m, (T, *_, integ) in zip(self.domains, terms))
        dist = self._distance(z)
        den = self.model.weight * dist
        for meta, (T, q, v, tau, p, sab, integ) in zip(self.domains, terms):
            h = T / meta.N
            dsab = p / sab                                   # d|p|/dp smoothed
            w = self.trap_w[:, None]
            dnum_dtau = 2.0 * h * w * dsab * v[:, 3:]
            dnum_dv = 2.0 * h * w * dsab * tau
            sl = meta.slices()
            g[sl["tau"]] += dnum_dtau.ravel() / den
            gv = np.zeros((meta.N + 1, NQ))
            gv[:, 3:] = dnum_dv
            g[sl["v"]] += gv.ravel() / den
            g[meta.off_T] += (self.trap_w @ integ) / meta.N / den
        last = self.domains[-1]
        g[last.q(last.N)] -= num * self.model.weight / den**2
        g[self.domains[0].q(0)] += num * self.model.weight / den**2
        return g

    # ------------------------------------------------------------------
    # equality constraints

    def eq_residual(self, z):
        r = np.zeros(self.n_eq)
        idx = {name: slice(a, b) for name, a, b in self.eq_index}
        gait = self.gait
        for d, meta in enumerate(self.domains):
            T, q, v, tau, lam, B = self._domain_arrays(z, meta)
            N = meta.N
            h = T / N
            a = accel_explicit(self.model, q, v, tau, lam, meta.contacts)
            dq = q[1:] - q[:-1] - 0.5 * h * (v[1:] + v[:-1])
            dv = v[1:] - v[:-1] - 0.5 * h * (a[1:] + a[:-1])
            r[idx[f"defect_q[{d}]"]] = dq.ravel()
            r[idx[f"defect_v[{d}]"]] = dv.ravel()
            if meta.nc:
                Js = [foot_point(self.model, leg).jacobian(q[1:]) for leg in meta.contacts]
                Jv = np.concatenate([np.einsum("kij,kj->ki", J, v[1:]) for J in Js], axis=1)
                r[idx[f"contact_vel[{d}]"]] = Jv.ravel()
            td = gait.touchdown_legs(d)
            if td:
                heights = [foot_point(self.model, leg).position(q[0])[1] for leg in td]
                r[idx[f"anchor[{d}]"]] = heights
            vc = q[:, 3:] - self.basis @ B.T
            r[idx[f"virtual[{d}]"]] = vc.ravel()

        for t, tr in enumerate(gait.transitions):
            meta = self.domains[t]
            nxt = self.domains[gait.next_index(t)]
            qN = z[meta.q(meta.N): meta.q(meta.N) + NQ]
            vN = z[meta.v(meta.N): meta.v(meta.N) + NQ]
            q0 = z[nxt.q(0): nxt.q(0) + NQ]
            v0 = z[nxt.v(0): nxt.v(0) + NQ]
            closure = t == len(gait.transitions) - 1
            dq = q0 - qN
            r[idx[f"q_cont[{t}]"]] = dq[1:] if closure else dq
            P = reset_matrix(self.model, qN, tr.impact_legs)
            r[idx[f"v_reset[{t}]"]] = v0 - P @ vN
        last = self.domains[-1]
        total_T = sum(z[m.off_T] for m in self.domains)
        r[idx["speed"]] = (z[last.q(last.N)] - z[self.domains[0].q(0)]
                           - self.options.speed * total_T)
        return r

    def eq_jacobian_triplets(self, z):
        R, C, V = [], [], []

        def put(row0, rows, col0, cols, vals):
            rr = np.repeat(np.asarray(rows) + row0, len(cols))
            cc = np.tile(np.asarray(cols) + col0, len(rows))
            R.append(rr)
            C.append(cc)
            V.append(np.asarray(vals, dtype=float).ravel())

        idx = {name: a for name, a, b in self.eq_index}
        gait = self.gait
        eye = np.eye(NQ)
        rngq = np.arange(NQ)
        for d, meta in enumerate(self.domains):
            T, q, v, tau, lam, B = self._domain_arrays(z, meta)
            N = meta.N
            h = T / N
            a, da_dq, da_dv, da_dtau, da_dlam = accel_derivatives(
                self.model, q, v, tau, lam, meta.contacts)

            r0 = idx[f"defect_q[{d}]"]
            for k in range(N):
                rows = rngq + k * NQ
                put(r0, rows, meta.q(k + 1), rngq, eye)
                put(r0, rows, meta.q(k), rngq, -eye)
                put(r0, rows, meta.v(k), rngq, -0.5 * h * eye)
                put(r0, rows, meta.v(k + 1), rngq, -0.5 * h * eye)
                put(r0, rows, meta.off_T, [0], -0.5 / N * (v[k] + v[k + 1])[:, None])

            r0 = idx[f"defect_v[{d}]"]
            for k in range(N):
                rows = rngq + k * NQ
                put(r0, rows, meta.v(k + 1), rngq, eye - 0.5 * h * da_dv[k + 1])
                put(r0, rows, meta.v(k), rngq, -eye - 0.5 * h * da_dv[k])
                put(r0, rows, meta.q(k), rngq, -0.5 * h * da_dq[k])
                put(r0, rows, meta.q(k + 1), rngq, -0.5 * h * da_dq[k + 1])
                put(r0, rows, meta.tau(k), np.arange(NU), -0.5 * h * da_dtau[k])
                put(r0, rows, meta.tau(k + 1), np.arange(NU), -0.5 * h * da_dtau[k + 1])
                if meta.nc:
                    put(r0, rows, meta.lam(k), np.arange(meta.nc), -0.5 * h * da_dlam[k])
                    put(r0, rows, meta.lam(k + 1), np.arange(meta.nc), -0.5 * h * da_dlam[k + 1])
                put(r0, rows, meta.off_T, [0], -0.5 / N * (a[k] + a[k + 1])[:, None])

            if meta.nc:
                r0 = idx[f"contact_vel[{d}]"]
                pts = [foot_point(self.model, leg) for leg in meta.contacts]
                J = np.concatenate([p.jacobian(q) for p in pts], axis=1)       # (N+1, nc, NQ)
                dJv = np.concatenate(
                    [np.einsum("kijm,kj->kim", p.jacobian_dq(q), v) for p in pts], axis=1)
                for k in range(1, N + 1):
                    rows = np.arange(meta.nc) + (k - 1) * meta.nc
                    put(r0, rows, meta.v(k), rngq, J[k])
                    put(r0, rows, meta.q(k), rngq, dJv[k])

            td = gait.touchdown_legs(d)
            if td:
                r0 = idx[f"anchor[{d}]"]
                for i, leg in enumerate(td):
                    Jz = foot_point(self.model, leg).jacobian(q[0])[1]
                    put(r0, [i], meta.q(0), rngq, Jz[None, :])

            r0 = idx[f"virtual[{d}]"]
            nb = bezier.DEGREE + 1
            for k in range(N + 1):
                for j in range(NU):
                    row = k * NU + j
                    put(r0, [row], meta.q(k) + 3 + j, [0], [[1.0]])
                    put(r0, [row], meta.off_B + j * nb, np.arange(nb), -self.basis[k][None, :])

        for t, tr in enumerate(gait.transitions):
            meta = self.domains[t]
            nxt = self.domains[gait.next_index(t)]
            closure = t == len(gait.transitions) - 1
            qN = z[meta.q(meta.N): meta.q(meta.N) + NQ]
            vN = z[meta.v(meta.N): meta.v(meta.N) + NQ]

            r0 = idx[f"q_cont[{t}]"]
            keep = rngq[1:] if closure else rngq
            put(r0, np.arange(len(keep)), nxt.q(0), rngq, eye[keep])
            put(r0, np.arange(len(keep)), meta.q(meta.N), rngq, -eye[keep])

            r0 = idx[f"v_reset[{t}]"]
            P = reset_matrix(self.model, qN, tr.impact_legs)
            put(r0, rngq, nxt.v(0), rngq, eye)
            put(r0, rngq, meta.v(meta.N), rngq, -P)
            if tr.impact_legs:
                dP = reset_matrix_dq(self.model, qN, tr.impact_legs)
                put(r0, rngq, meta.q(meta.N), rngq, -np.einsum("ijk,j->ik", dP, vN))

        r0 = idx["speed"]
        last = self.domains[-1]
        put(r0, [0], last.q(last.N), [0], [[1.0]])
        put(r0, [0], self.domains[0].q(0), [0], [[-1.0]])
        for meta in self.domains:
            put(r0, [0], meta.off_T, [0], [[-self.options.speed]])
        return np.concatenate(R), np.concatenate(C), np.concatenate(V)

    def eq_jacobian(self, z):
        rows, cols, vals = self.eq_jacobian_triplets(z)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.n_eq, self.n)).tocsr()

    # ------------------------------------------------------------------
    # inequality constraints, g(z) <= 0

    def ineq_residual(self, z):
        r = np.zeros(self.n_ineq)
        idx = {name: slice(a, b) for name, a, b in self.ineq_index}
        mu = self.model.friction
        for d, meta in enumerate(self.domains):
            if meta.nc:
                _, q, v, tau, lam, _ = self._domain_arrays(z, meta)
                fx = lam[:, 0::2]
                fz = lam[:, 1::2]
                rows = np.stack([fx - mu * fz, -fx - mu * fz], axis=-1)   # (N+1, legs, 2)
                r[idx[f"friction[{d}]"]] = rows.reshape(meta.N + 1, -1).ravel()
            spec = self._clearance_nodes[d]
            if spec:
                _, q, *_ = self._domain_arrays(z, meta)
                vals = [thr - foot_point(self.model, leg).position(q[k])[1]
                        for leg, k, thr in spec]
                r[idx[f"clearance[{d}]"]] = vals
        o = self.options
        for t, tr in enumerate(self.gait.transitions):
            if tr.event is not EventType.TOUCHDOWN:
                continue
            meta = self.domains[t]
            qN = z[meta.q(meta.N): meta.q(meta.N) + NQ]
            vN = z[meta.v(meta.N): meta.v(meta.N) + NQ]
            rows = []
            for leg in tr.legs:
                w = foot_point(self.model, leg).jacobian(qN) @ vN
                rows += [w[0] - o.td_vx_max, -w[0] - o.td_vx_max,
                         w[1], -w[1] + o.td_vz_min]
            r[idx[f"td_vel[{t}]"]] = rows
        r[idx["stride"]] = o.stride_min - self._distance(z)
        return r

    def ineq_jacobian_triplets(self, z):
        R, C, V = [], [], []

        def put(row0, rows, col0, cols, vals):
            rr = np.repeat(np.asarray(rows) + row0, len(cols))
            cc = np.tile(np.asarray(cols) + col0, len(rows))
            R.append(rr)
            C.append(cc)
            V.append(np.asarray(vals, dtype=float).ravel())

        idx = {name: a for name, a, b in self.ineq_index}
        mu = self.model.friction
        rngq = np.arange(NQ)
        for d, meta in enumerate(self.domains):
            if meta.nc:
                r0 = idx[f"friction[{d}]"]
                block = np.array([[1.0, -mu], [-1.0, -mu]])
                for k in range(meta.N + 1):
                    for i in range(len(meta.contacts)):
                        rows = np.arange(2) + k * meta.nc + 2 * i
                        put(r0, rows, meta.lam(k) + 2 * i, np.arange(2), block)
            spec = self._clearance_nodes[d]
            if spec:
                r0 = idx[f"clearance[{d}]"]
                _, q, *_ = self._domain_arrays(z, meta)
                for i, (leg, k, thr) in enumerate(spec):
                    Jz = foot_point(self.model, leg).jacobian(q[k])[1]
                    put(r0, [i], meta.q(k), rngq, -Jz[None, :])
        o = self.options
        for t, tr in enumerate(self.gait.transitions):
            if tr.event is not EventType.TOUCHDOWN:
                continue
            meta = self.domains[t]
            r0 = idx[f"td_vel[{t}]"]
            qN = z[meta.q(meta.N): meta.q(meta.N) + NQ]
            vN = z[meta.v(meta.N): meta.v(meta.N) + NQ]
            sign = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
            for i, leg in enumerate(tr.legs):
                pt = foot_point(self.model, leg)
                J = pt.jacobian(qN)
                dJv = np.einsum("ijm,j->im", pt.jacobian_dq(qN), vN)
                rows = np.arange(4) + 4 * i
                put(r0, rows, meta.v(meta.N), rngq, sign @ J)
                put(r0, rows, meta.q(meta.N), rngq, sign @ dJv)
        r0 = idx["stride"]
        last = self.domains[-1]
        put(r0, [0], last.q(last.N), [0], [[-1.0]])
        put(r0, [0], self.domains[0].q(0), [0], [[1.0]])
        return np.concatenate(R), np.concatenate(C), np.concatenate(V)

    def ineq_jacobian(self, z):
        rows, cols, vals = self.ineq_jacobian_triplets(z)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.n_ineq, self.n)).tocsr()


# --------------------------------------------------------------------------
# heuristic warm start


def _leg_ik(model, base_x, base_z, pitch, leg, foot_x, foot_z):
    """Planar two-link inverse kinematics for one leg pair."""
    hx = model.hip_x if leg is Leg.FRONT else -model.hip_x
    hip = np.array([base_x + hx * np.cos(pitch) - model.hip_z * np.sin(pitch),
                    base_z + hx * np.sin(pitch) + model.hip_z * np.cos(pitch)])
    r = np.array([foot_x, foot_z]) - hip
    lt, lc = model.thigh_length, model.calf_length
    d = np.clip(np.hypot(*r), 0.25 * (lt + lc), 0.99 * (lt + lc))
    calf = np.arccos(np.clip((d * d - lt * lt - lc * lc) / (2 * lt * lc), -1.0, 1.0))
    gamma = np.arctan2(lc * np.sin(calf), lt + lc * np.cos(calf))
    alpha = np.arctan2(r[0], -r[1])
    thigh = alpha - gamma - pitch
    return float(thigh), float(calf)


def standing_pose(model, thigh=-0.75, calf=1.5):
    """Configuration standing on both pairs with the nominal leg fold."""
    q = np.array([0.0, 0.5, 0.0, thigh, calf, thigh, calf])
    drop = foot_point(model, Leg.FRONT).position(q)[1] - q[1]
    q[1] = -drop
    return q


def initial_guess(trans: Transcription) -> np.ndarray:
    """Kinematically consistent warm start for the gait NLP.

    Builds a constant-speed base path with a ballistic vertical arc in
    flight, keeps stance feet planted under the hip via inverse kinematics,
    sweeps swing feet along a low arc to the next foothold, and backfills
    velocities, static torques and weight-sharing contact forces.
    """
    model, gait, o = trans.model, trans.gait, trans.options
    N = o.nodes
    D = gait.n_domains
    q_stand = standing_pose(model)
    z0 = q_stand[1]

    durations = []
    for dom in gait.domains:
        durations.append(0.07 if dom.in_flight else 0.12)
    durations = np.array(durations)
    t_edges = np.concatenate([[0.0], np.cumsum(durations)])
    T_cycle = t_edges[-1]

    # stance episodes per leg on the cyclic timeline
    def stance_mask(leg):
        return [leg in dom.contacts for dom in gait.domains]

    def episode(leg):
        mask = stance_mask(leg)
        if not any(mask):
            raise ValueError("every leg must touch down once per cycle")
        # rotate so the episode is contiguous from its first domain
        start = next(i for i in range(D) if mask[i] and not mask[(i - 1) % D])
        length = 1
        while mask[(start + length) % D]:
            length += 1
        t_on = t_edges[start]
        t_off = t_on + durations[[(start + j) % D for j in range(length)]].sum()
        return t_on, t_off

    speed = o.speed
    episodes = {}
    for leg in Leg:
        t_on, t_off = episode(leg)
        hx = model.hip_x if leg is Leg.FRONT else -model.hip_x
        span = (t_off - t_on) % T_cycle or T_cycle
        episodes[leg] = (t_on, span, hx)

    def base_z(t_global):
        # small ballistic arc in flight, flat in stance
        for d in range(D):
            if t_edges[d] <= t_global <= t_edges[d + 1] and gait.domains[d].in_flight:
                T = durations[d]
                tt = t_global - t_edges[d]
                g = model.gravity
                return z0 + 0.5 * g * (T / 2) ** 2 - 0.5 * g * (tt - T / 2) ** 2
        return z0

    def foot_target(leg, t):
        t_on, span, hx = episodes[leg]
        t_rel = (t - t_on) % T_cycle
        # footholds advance one stride per cycle; anchor at mid-episode hip x
        anchor = speed * (t - t_rel + 0.5 * span) + hx
        if t_rel <= span:
            return anchor, 0.0
        u = (t_rel - span) / (T_cycle - span)
        # zero-velocity blend at both ends so liftoff/touchdown leave the
        # velocity grid continuous
        ux = u * u * (3.0 - 2.0 * u)
        return anchor + ux * speed * T_cycle, 0.05 * np.sin(np.pi * u) ** 2

    def q_of_t(t):
        # base_z flattens outside flight windows, so this is cyclic up to the
        # steady x advance
        bx = speed * t
        bz = base_z(t % T_cycle)
        out = np.array([bx, bz, 0.0, 0.0, 0.0, 0.0, 0.0])
        for leg, (i_th, i_ca) in ((Leg.FRONT, (3, 4)), (Leg.REAR, (5, 6))):
            fx, fz = foot_target(leg, t)
            out[i_th], out[i_ca] = _leg_ik(model, bx, bz, 0.0, leg, fx, fz)
        return out

    trajs = []
    for d, dom in enumerate(gait.domains):
        h = durations[d] / N
        # two phantom nodes per side give boundary-consistent central
        # differences for velocity and acceleration
        t_ext = t_edges[d] + np.arange(-2, N + 3) * h
        q_ext = np.array([q_of_t(t) for t in t_ext])
        v_ext = (q_ext[2:] - q_ext[:-2]) / (2 * h)
        a = (v_ext[2:] - v_ext[:-2]) / (2 * h)
        q = q_ext[2:-2]
        v = v_ext[1:-1]
        v[:, 0] = speed
        tau = np.zeros((N + 1, NU))
        lam = np.zeros((N + 1, trans.domains[d].nc))
        nlegs = len(dom.contacts)
        tr = gait.transitions[d]
        S = actuation_matrix(model)
        for k in range(N + 1):
            # inverse dynamics: pick (tau, lam) that best realize the node
            # acceleration, so the defect rows start close to closed
            rhs = mass_matrix(model, q[k]) @ a[k] + bias_forces(model, q[k], v[k])
            A = S
            lifting = (k == N and nlegs and tr.event is EventType.LIFTOFF)
            held = [leg for leg in dom.contacts
                    if not (lifting and leg in tr.legs)]
            if held:
                A = np.hstack([S, contact_jacobian(model, q[k], held).T])
            u, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if held:
                # clip guessed forces into the friction cone, then re-fit
                # torques against the clipped forces
                lam_k = u[NU:].reshape(-1, 2)
                lam_k[:, 1] = np.maximum(lam_k[:, 1], 0.0)
                cap = model.friction * lam_k[:, 1]
                lam_k[:, 0] = np.clip(lam_k[:, 0], -cap, cap)
                J = contact_jacobian(model, q[k], held)
                tau[k], *_ = np.linalg.lstsq(S, rhs - J.T @ lam_k.ravel(), rcond=None)
                for j, leg in enumerate(held):
                    i = dom.contacts.index(leg)
                    lam[k, 2 * i: 2 * i + 2] = lam_k[j]
            else:
                tau[k] = u[:NU]
        coeffs = np.array([bezier.fit(trans.phases, q[:, 3 + j]) for j in range(NU)])
        trajs.append(DomainTraj(durations[d], q, v, tau, lam, coeffs))

    z = trans.pack(trajs)
    z = np.clip(z, trans.lb, trans.ub)
    return z
