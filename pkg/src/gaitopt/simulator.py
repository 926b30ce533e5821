"""Event-driven simulation of planned gaits for cross-validation.

Integrates the stance-constrained dynamics domain by domain with scipy's
RK45, detecting the gait's exit events (touchdown: swing-foot height crossing
zero from above; liftoff: normal contact force crossing zero from above) and
applying the plastic impact at touchdowns.  Torques combine the plan's
feedforward, linearly interpolated in time, with optional PD tracking of the
per-domain joint reference curves; everything is clipped to the motor limit.

Contact during stance can be Baumgarte-stabilized (both poles at the given
rate); switch it off when auditing energy balance, since the stabilization
forces perform spurious work on a drifting foot.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import bezier
from .dynamics import (
    NQ,
    ContactSet,
    DegenerateContactError,
    Leg,
    constrained_accel,
    foot_point,
    impact_map,
)
from .gaits import EventType, HybridGait, gait_by_name


@dataclass(frozen=True)
class SimOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    baumgarte: float = 100.0          # rad/s stabilization poles, 0 = off
    use_pd: bool = True
    kp: float = 100.0
    kd: float = 10.0
    min_event_gap: float = 1e-4       # event arming time after domain entry
    timeout_factor: float = 3.0       # x nominal duration before giving up
    samples_per_domain: int = 120
    n_cycles: int = 1


@dataclass
class SimDomain:
    """Sampled simulated trajectory of one domain visit."""

    index: int
    name: str
    t0: float
    duration: float
    t: np.ndarray          # (n,) global time
    q: np.ndarray          # (n, 7)
    v: np.ndarray          # (n, 7)
    tau: np.ndarray        # (n, 4) per-motor torques actually applied
    forces: dict           # leg -> (n, 2) contact force, stance legs only
    event: str = ""


@dataclass
class SimResult:
    gait_name: str
    domains: list = field(default_factory=list)
    success: bool = False
    failure: str = ""
    impacts: list = field(default_factory=list)   # (t, {leg: impulse})
    q_end: np.ndarray = None   # state after the final transition (post-impact)
    v_end: np.ndarray = None

    @property
    def duration(self):
        return self.domains[-1].t[-1] - self.domains[0].t[0] if self.domains else 0.0

    def final_state(self):
        if self.q_end is not None:
            return self.q_end.copy(), self.v_end.copy()
        d = self.domains[-1]
        return d.q[-1].copy(), d.v[-1].copy()


class _DomainController:
    """Feedforward + optional PD torque with motor-limit clipping."""

    def __init__(self, model, traj, options):
        self.model = model
        self.o = options
        self.T = traj.duration
        self.t_nodes = np.linspace(0.0, self.T, traj.tau.shape[0])
        self.tau_nodes = traj.tau
        self.coeffs = traj.coeffs

    def __call__(self, t, x):
        s = np.clip(t / self.T, 0.0, 1.0)
        tau = np.array([np.interp(t, self.t_nodes, self.tau_nodes[:, j])
                        for j in range(self.tau_nodes.shape[1])])
        if self.o.use_pd:
            q_ref = bezier.curve(self.coeffs, s)
            v_ref = bezier.curve_derivative(self.coeffs, s) / self.T
            tau = tau + self.o.kp * (q_ref - x[3:NQ]) + self.o.kd * (v_ref - x[NQ + 3:])
        lim = self.model.motor_torque_limit
        return np.clip(tau, -lim, lim)


def _domain_rhs(model, contacts, controller, options):
    def rhs(t, x):
        q, v = x[:NQ], x[NQ:]
        tau = controller(t, x)
        qdd, _ = constrained_accel(model, q, v, tau, contacts,
                                   baumgarte=options.baumgarte)
        return np.concatenate([v, qdd])
    return rhs


def _make_events(model, gait, d, contacts, controller, options):
    """Exit guard plus premature-liftoff watchdogs, all armed after a delay."""
    tr = gait.transitions[d]
    gap = options.min_event_gap

    def armed(fn):
        def ev(t, x):
            if t < gap:
                return abs(fn(t, x)) + 1.0
            return fn(t, x)
        ev.terminal = True
        ev.direction = -1
        return ev

    events = []
    if tr.event is EventType.TOUCHDOWN:
        for leg in tr.legs:
            events.append(armed(lambda t, x, leg=leg:
                                foot_point(model, leg).position(x[:NQ])[1]))
    else:
        for leg in tr.legs:
            def force_guard(t, x, leg=leg):
                tau = controller(t, x)
                _, forces = constrained_accel(model, x[:NQ], x[NQ:], tau, contacts,
                                              baumgarte=options.baumgarte)
                return forces[leg][1]
            events.append(armed(force_guard))
    n_exit = len(events)
    watch = [leg for leg in contacts.legs
             if not (tr.event is EventType.LIFTOFF and leg in tr.legs)]
    for leg in watch:
        def violation(t, x, leg=leg):
            tau = controller(t, x)
            _, forces = constrained_accel(model, x[:NQ], x[NQ:], tau, contacts,
                                          baumgarte=options.baumgarte)
            return forces[leg][1]
        events.append(armed(violation))
    return events, n_exit, watch


def simulate(model, gait: HybridGait, solution, options: SimOptions = None) -> SimResult:
    """Run the planned gait forward through its contact sequence.

    ``solution`` is a :class:`~gaitopt.transcription.GaitSolution`; simulation
    starts from its first node state and visits the domains in cycle order,
    ``options.n_cycles`` times around.
    """
    o = options or SimOptions()
    out = SimResult(gait_name=gait.name)
    q = solution.domains[0].q[0].copy()
    v = solution.domains[0].v[0].copy()
    t_global = 0.0

    for cycle in range(o.n_cycles):
        for d, dom in enumerate(gait.domains):
            traj = solution.domains[d]
            ctrl = _DomainController(model, traj, o)
            anchors = tuple((float(foot_point(model, leg).position(q)[0]), 0.0)
                            for leg in dom.contacts)
            contacts = ContactSet(dom.contacts, anchors)
            rhs = _domain_rhs(model, contacts, ctrl, o)
            events, n_exit, watch = _make_events(model, gait, d, contacts, ctrl, o)
            t_max = o.timeout_factor * traj.duration
            try:
                ivp = solve_ivp(rhs, (0.0, t_max), np.concatenate([q, v]),
                                method="RK45", rtol=o.rtol, atol=o.atol,
                                events=events, dense_output=True)
            except DegenerateContactError as err:
                out.failure = f"domain {dom.name}: {err}"
                return out
            if not ivp.success:
                out.failure = f"domain {dom.name}: integrator failed ({ivp.message})"
                return out

            hit = [i for i, te in enumerate(ivp.t_events) if te.size]
            if not hit:
                out.failure = f"domain {dom.name}: no exit event within {t_max:.3f} s"
                _record(out, model, dom, d, contacts, ctrl, ivp, ivp.t[-1], t_global, o, "timeout")
                return out
            i_first = min(hit, key=lambda i: ivp.t_events[i][0])
            t_end = float(ivp.t_events[i_first][0])
            if i_first >= n_exit:
                leg = watch[i_first - n_exit]
                out.failure = f"domain {dom.name}: contact force on {leg.value} leg went negative"
                _record(out, model, dom, d, contacts, ctrl, ivp, t_end, t_global, o, "contact_violation")
                return out

            _record(out, model, dom, d, contacts, ctrl, ivp, t_end, t_global, o,
                    gait.transitions[d].event.value)
            x_end = ivp.sol(t_end)
            q, v = x_end[:NQ].copy(), x_end[NQ:].copy()
            t_global += t_end

            tr = gait.transitions[d]
            if tr.event is EventType.TOUCHDOWN:
                v, impulses = impact_map(model, q, v, ContactSet(tr.impact_legs))
                out.impacts.append((t_global, {leg: imp for leg, imp in impulses.items()}))
    out.q_end, out.v_end = q.copy(), v.copy()
    out.success = True
    return out


def _record(out, model, dom, d, contacts, ctrl, ivp, t_end, t_global, options, event):
    ts = np.linspace(0.0, t_end, options.samples_per_domain)
    X = ivp.sol(ts)
    q, v = X[:NQ].T, X[NQ:].T
    tau = np.array([ctrl(t, X[:, i]) for i, t in enumerate(ts)])
    forces = {}
    if contacts:
        per_leg = {leg: np.zeros((len(ts), 2)) for leg in contacts.legs}
        for i, t in enumerate(ts):
            _, f = constrained_accel(model, q[i], v[i], tau[i], contacts,
                                     baumgarte=options.baumgarte)
            for leg in contacts.legs:
                per_leg[leg][i] = f[leg]
        forces = per_leg
    out.domains.append(SimDomain(
        index=d, name=dom.name, t0=t_global, duration=t_end,
        t=t_global + ts, q=q, v=v, tau=tau, forces=forces, event=event,
    ))


def cycle_residual(model, gait, solution, options: SimOptions = None):
    """Simulated return-map mismatch of one full cycle.

    Simulates one cycle from the plan's initial state and returns the
    infinity-norm gap between the end and start states with the horizontal
    base position excluded (it advances one stride), split as (q_gap, v_gap),
    plus the :class:`SimResult`.
    """
    o = options or SimOptions()
    res = simulate(model, gait, solution, o)
    if not res.success:
        return np.inf, np.inf, res
    q0 = solution.domains[0].q[0]
    v0 = solution.domains[0].v[0]
    qf, vf = res.final_state()
    dq = np.abs(qf - q0)
    dq[0] = 0.0
    return float(dq.max()), float(np.abs(vf - v0).max()), res


@dataclass
class CrossValidation:
    """Open-loop replay report: return-map gaps and event-sequence check."""

    stride_residuals: list          # per stride, max state gap (x excluded)
    events_match: bool
    expected_events: list
    realized_events: list
    sim: SimResult


def cross_validate(model, solution, strides: int = 1,
                   options: SimOptions = None, gait: HybridGait = None):
    """Replay a plan open loop for whole strides and score periodicity.

    Each stride's residual is the infinity-norm gap between the plan's
    initial state and the simulated state back on the cycle-start section
    (after the wrap transition's impact, horizontal position excluded).
    The event log must reproduce the automaton's guard sequence in order.
    """
    gait = gait or gait_by_name(solution.gait_name)
    o = replace(options or SimOptions(), n_cycles=int(strides))
    res = simulate(model, gait, solution, o)

    expected = [tr.event.value for tr in gait.transitions] * strides
    realized = [dom.event for dom in res.domains]
    events_match = res.success and realized == expected

    nd = gait.n_domains
    q0 = solution.domains[0].q[0]
    v0 = solution.domains[0].v[0]
    residuals = []
    for k in range(1, strides + 1):
        if not res.success or len(res.domains) < nd * k:
            residuals.append(np.inf)
            continue
        if k * nd < len(res.domains):
            qk, vk = res.domains[k * nd].q[0], res.domains[k * nd].v[0]
        else:
            qk, vk = res.final_state()
        dq = np.abs(qk - q0)
        dq[0] = 0.0
        residuals.append(float(max(dq.max(), np.abs(vk - v0).max())))
    return CrossValidation(stride_residuals=residuals, events_match=events_match,
                           expected_events=expected, realized_events=realized,
                           sim=res)
