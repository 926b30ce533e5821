"""High-level gait synthesis: single solves and warm-started speed sweeps."""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .gaits import HybridGait, gait_by_name
from .solver import SolverOptions, auto_scaled, polish_feasibility, solve
from .transcription import (
    DomainTraj,
    GaitSolution,
    Transcription,
    TranscriptionOptions,
    initial_guess,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaitSolveOptions:
    """Pipeline knobs for one gait solve."""

    transcription: TranscriptionOptions = field(default_factory=TranscriptionOptions)
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(
        backend="ip", tol_feas=1e-7, polish_max_nfev=120,
        ip_maxiter=8000, time_budget=420.0))
    restarts: int = 2
    restart_noise: float = 0.05
    seed: int = 0
    feas_target: float = 1e-7     # acceptable true constraint violation


def solve_gait(model, gait, speed: float, options: GaitSolveOptions = None,
               warm_start: GaitSolution = None):
    """Find a periodic gait of the given family at one average speed.

    Returns a :class:`GaitSolution`; its ``status`` records how the solve
    ended and the violation fields hold the true (unscaled) residuals.
    """
    opts = options or GaitSolveOptions()
    if isinstance(gait, str):
        gait = gait_by_name(gait)
    t_opts = replace(opts.transcription, speed=float(speed))
    trans = Transcription(model, gait, t_opts)
    if warm_start is not None:
        z0 = trans.pack(warm_start.domains)
        z0 = np.clip(z0, trans.lb, trans.ub)
        z0[trans.domains[0].q(0)] = 0.0
    else:
        z0 = initial_guess(trans)

    if opts.solver.backend == "ip":
        # the trust-region interior point copes with the raw row scaling
        run_problem, start, to_raw, to_run = trans, z0, (lambda zz: zz), (lambda zz: zz)
    else:
        scaled, zh0 = auto_scaled(trans, z0, trans.variable_scales(), row_cap=1e3)
        run_problem, start, to_raw, to_run = scaled, zh0, scaled.unscale, scaled.scale_point
    rng = np.random.default_rng(opts.seed)
    best = None
    t0 = time.perf_counter()
    for attempt in range(opts.restarts + 1):
        res = solve(run_problem, start, opts.solver)
        z = to_raw(res.z)
        sol = trans.solution(z, status=res.status)
        feasible = max(sol.eq_violation, sol.ineq_violation) <= opts.feas_target
        if not feasible:
            polished = polish_feasibility(trans, z, opts.solver)
            if polished is not None and max(polished[1], polished[2]) < max(
                    sol.eq_violation, sol.ineq_violation):
                sol = trans.solution(polished[0], status=res.status)
                feasible = max(sol.eq_violation, sol.ineq_violation) <= opts.feas_target
        log.info("%s @ %.2f m/s try %d: %s cot=%.4f eq=%.2e ineq=%.2e (%.1fs)",
                 gait.name, speed, attempt, res.status, sol.objective,
                 sol.eq_violation, sol.ineq_violation, time.perf_counter() - t0)
        if _better(sol, best, opts.feas_target):
            best = sol
        if feasible and res.status in ("optimal", "feasible"):
            break
        incumbent = trans.pack(best.domains) if best is not None else z0
        noise = opts.restart_noise * rng.standard_normal(trans.n)
        scale = np.where(np.isfinite(trans.ub - trans.lb),
                         np.maximum(trans.ub - trans.lb, 1e-3), 1.0)
        start = to_run(np.clip(incumbent + noise * scale, trans.lb, trans.ub))
    best.status = _final_status(best, opts.feas_target)
    return best


def _better(a, b, tol):
    if a is None:
        return False
    if b is None:
        return True
    fa = max(a.eq_violation, a.ineq_violation) <= tol
    fb = max(b.eq_violation, b.ineq_violation) <= tol
    if fa != fb:
        return fa
    if fa:
        return a.objective < b.objective
    return max(a.eq_violation, a.ineq_violation) < max(b.eq_violation, b.ineq_violation)


def _final_status(sol, tol):
    viol = max(sol.eq_violation, sol.ineq_violation)
    if viol <= tol:
        return "feasible" if sol.status not in ("optimal",) else "optimal"
    return "infeasible"


@dataclass
class SweepResult:
    gait_name: str
    speeds: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict)   # speed -> GaitSolution
    failures: dict = field(default_factory=dict)    # speed -> status string

    @property
    def feasible_fraction(self):
        n = len(self.speeds)
        return len(self.solutions) / n if n else 0.0


def speed_sweep(model, gait, speeds, options: GaitSolveOptions = None,
                seed_speed: float = None, progress=None) -> SweepResult:
    """Solve a gait across a speed range by warm-started continuation.

    The sweep starts at ``seed_speed`` (defaults to the speed closest to
    2 m/s), then walks outward in both directions, warm-starting each solve
    from its feasible neighbor.  Speeds whose solve stays infeasible are
    recorded in ``failures`` and the continuation bridges over them.
    """
    opts = options or GaitSolveOptions()
    if isinstance(gait, str):
        gait = gait_by_name(gait)
    speeds = sorted(float(s) for s in speeds)
    if not speeds:
        raise ValueError("no speeds requested")
    if seed_speed is None:
        seed_speed = min(speeds, key=lambda s: abs(s - 2.0))
    i0 = speeds.index(min(speeds, key=lambda s: abs(s - seed_speed)))

    out = SweepResult(gait_name=gait.name, speeds=list(speeds))

    def attempt(speed, warm):
        sol = solve_gait(model, gait, speed, opts, warm_start=warm)
        if sol.status == "infeasible":
            out.failures[speed] = f"violation {max(sol.eq_violation, sol.ineq_violation):.2e}"
            return None
        out.solutions[speed] = sol
        if progress is not None:
            progress(speed, sol)
        return sol

    center = attempt(speeds[i0], None)
    up_warm = center
    for s in speeds[i0 + 1:]:
        got = attempt(s, up_warm)
        up_warm = got or up_warm
    down_warm = center
    for s in reversed(speeds[:i0]):
        got = attempt(s, down_warm)
        down_warm = got or down_warm
    return out
