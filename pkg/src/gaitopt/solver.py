"""Augmented-Lagrangian solver for sparse bound-constrained NLPs.

Problems are any object exposing

    n, lb, ub                               box bounds
    objective(z), gradient(z)               smooth scalar objective
    eq_residual(z), eq_jacobian(z)          c_E(z) = 0, sparse Jacobian
    ineq_residual(z), ineq_jacobian(z)      c_I(z) <= 0, sparse Jacobian

The classic shifted-penalty augmented Lagrangian

    phi(z) = f(z) + ||y_E + rho c_E||^2 / (2 rho) + ||max(0, y_I + rho c_I)||^2 / (2 rho)

is minimized within the box by a projected L-BFGS inner loop (Armijo
backtracking on the projected arc); multipliers follow the standard first-order
update and the penalty grows only when the constraint violation stalls.
Optionally scipy's L-BFGS-B replaces the hand-rolled inner loop, and a final
trust-region least-squares polish pushes feasibility to tight tolerances.
"""

import logging
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, least_squares, minimize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol_feas: float = 1e-8
    tol_stat: float = 1e-6
    rho0: float = 10.0
    rho_max: float = 1e9
    rho_growth: float = 5.0
    sufficient_decrease: float = 0.5
    max_outer: int = 30
    max_inner: int = 400
    backend: str = "al"             # "al" (built-in reference) or "ip" (scipy adapter)
    inner: str = "lbfgs"            # "lbfgs" (built-in) or "scipy"
    lbfgs_memory: int = 25
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_linesearch: int = 40
    inner_tol0: float = 1e-2
    inner_tol_shrink: float = 0.2
    polish: bool = True
    polish_max_nfev: int = 60
    # interior-point backend knobs
    ip_maxiter: int = 8000
    ip_gtol: float = 1e-8
    ip_plateau: float = 2e-4        # objective decrease per plateau window to keep going
    ip_plateau_window: int = 500
    time_budget: float = None       # wall seconds; None = unlimited
    verbose: bool = False


@dataclass
class SolveResult:
    z: np.ndarray
    status: str
    objective: float
    eq_violation: float
    ineq_violation: float
    stationarity: float
    outer_iters: int
    inner_iters: int
    rho: float
    runtime: float
    history: list = field(default_factory=list)

    @property
    def success(self):
        return self.status in ("optimal", "feasible")

    @property
    def violation(self):
        return max(self.eq_violation, self.ineq_violation)


def _violations(problem, z):
    cE = problem.eq_residual(z)
    cI = problem.ineq_residual(z)
    vE = float(np.abs(cE).max()) if cE.size else 0.0
    vI = float(np.maximum(cI, 0.0).max()) if cI.size else 0.0
    return cE, cI, vE, vI


class ReducedProblem:
    """Eliminates variables whose box closes to a point (lb == ub)."""

    def __init__(self, base):
        lb = np.asarray(base.lb, dtype=float)
        ub = np.asarray(base.ub, dtype=float)
        self.base = base
        self.fixed = lb >= ub
        self.free = np.flatnonzero(~self.fixed)
        self.values = np.where(self.fixed, lb, 0.0)
        self.n = self.free.size
        self.lb = lb[self.free]
        self.ub = ub[self.free]

    def embed(self, zr):
        z = self.values.copy()
        z[self.free] = zr
        return z

    def restrict(self, z):
        return np.asarray(z, dtype=float)[self.free]

    def objective(self, zr):
        return self.base.objective(self.embed(zr))

    def gradient(self, zr):
        return self.base.gradient(self.embed(zr))[self.free]

    def eq_residual(self, zr):
        return self.base.eq_residual(self.embed(zr))

    def eq_jacobian(self, zr):
        return self.base.eq_jacobian(self.embed(zr)).tocsc()[:, self.free].tocsr()

    def ineq_residual(self, zr):
        return self.base.ineq_residual(self.embed(zr))

    def ineq_jacobian(self, zr):
        return self.base.ineq_jacobian(self.embed(zr)).tocsc()[:, self.free].tocsr()


class SlackProblem:
    """Equality-only reformulation: c_I(z) + s = 0 with slack bounds s >= 0.

    Lets Gauss-Newton inner solvers treat the whole constraint set as smooth
    least squares; the extra variables ride along at the end of z.
    """

    def __init__(self, base, z_probe):
        self.base = base
        self.n_base = base.n
        self.m = base.ineq_residual(np.asarray(z_probe, dtype=float)).size
        self.n = base.n + self.m
        self.lb = np.concatenate([base.lb, np.zeros(self.m)])
        self.ub = np.concatenate([base.ub, np.full(self.m, np.inf)])

    def embed(self, z):
        s = np.maximum(0.0, -self.base.ineq_residual(z))
        return np.concatenate([z, s])

    def split(self, x):
        return x[: self.n_base]

    def objective(self, x):
        return self.base.objective(self.split(x))

    def gradient(self, x):
        g = np.zeros(self.n)
        g[: self.n_base] = self.base.gradient(self.split(x))
        return g

    def eq_residual(self, x):
        z, s = x[: self.n_base], x[self.n_base:]
        return np.concatenate([self.base.eq_residual(z),
                               self.base.ineq_residual(z) + s])

    def eq_jacobian(self, x):
        z = self.split(x)
        JE = self.base.eq_jacobian(z)
        JI = self.base.ineq_jacobian(z)
        top = sp.hstack([JE, sp.csr_matrix((JE.shape[0], self.m))])
        bottom = sp.hstack([JI, sp.eye(self.m)])
        return sp.vstack([top, bottom], format="csr")

    def ineq_residual(self, x):
        return np.zeros(0)

    def ineq_jacobian(self, x):
        return sp.csr_matrix((0, self.n))


def _two_loop(g, mem):
    q = g.copy()
    alphas = []
    for s, y, rho_i in reversed(mem):
        a = rho_i * (s @ q)
        alphas.append(a)
        q -= a * y
    if mem:
        s, y, _ = mem[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho_i), a in zip(mem, reversed(alphas)):
        b = rho_i * (y @ q)
        q += (a - b) * s
    return q


def _projected_lbfgs(value, value_grad, z0, lb, ub, opts: SolverOptions, tol):
    """Minimize within the box; returns (z, f, g, n_iters)."""

    def project(x):
        return np.minimum(np.maximum(x, lb), ub)

    z = project(z0)
    f, g = value_grad(z)
    mem = deque(maxlen=opts.lbfgs_memory)
    it = 0
    for it in range(1, opts.max_inner + 1):
        pg = z - project(z - g)
        if np.abs(pg).max() <= tol:
            break
        d = -_two_loop(g, list(mem))
        if not np.all(np.isfinite(d)) or g @ d >= 0.0:
            mem.clear()
            d = -g
        alpha, zn, fn = 1.0, None, None
        for _ in range(opts.max_linesearch):
            cand = project(z + alpha * d)
            step = cand - z
            if not np.any(step):
                break
            fc = value(cand)
            if np.isfinite(fc) and fc <= f + opts.armijo_c1 * (g @ step):
                zn, fn = cand, fc
                break
            alpha *= opts.backtrack
        if zn is None:
            if mem:
                mem.clear()
                continue
            break
        fn, gn = value_grad(zn)
        s = zn - z
        yv = gn - g
        sy = s @ yv
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            mem.append((s, yv, 1.0 / sy))
        z, f, g = zn, fn, gn
    return z, f, g, it


def solve(problem, z0, options: SolverOptions = None) -> SolveResult:
    """One solver run from the given start point.

    The default backend is the built-in augmented Lagrangian; ``backend="ip"``
    routes the same problem object through scipy's trust-region interior-point
    method instead.  With ``inner="trf"`` the AL subproblems are solved as
    bound-constrained Gauss-Newton least squares; inequalities are then
    carried as slack equalities internally and stripped from the returned
    point.
    """
    opts = options or SolverOptions()
    report_problem = problem
    z0 = np.clip(np.asarray(z0, dtype=float), problem.lb, problem.ub)
    if not (np.all(np.isfinite(z0))
            and np.isfinite(problem.objective(z0))
            and np.all(np.isfinite(problem.eq_residual(z0)))
            and np.all(np.isfinite(problem.ineq_residual(z0)))):
        raise ValueError("bad initial point")
    reduced = None
    if np.any(np.asarray(problem.lb) >= np.asarray(problem.ub)):
        reduced = ReducedProblem(problem)
        problem = reduced
        z0 = reduced.restrict(z0)
    if opts.backend == "ip":
        result = _solve_ip(problem, z0, opts)
    elif opts.backend == "al":
        result = _solve_al_prepared(problem, z0, opts)
    else:
        raise ValueError(f"unknown solver backend {opts.backend!r}")
    if reduced is not None:
        result.z = reduced.embed(result.z)
        _, _, vE, vI = _violations(report_problem, result.z)
        result.eq_violation, result.ineq_violation = vE, vI
    if opts.polish and result.violation > opts.tol_feas:
        polished = polish_feasibility(report_problem, result.z, opts)
        if polished is not None:
            pz, pvE, pvI = polished
            if max(pvE, pvI) < result.violation:
                result.z = pz
                result.eq_violation = pvE
                result.ineq_violation = pvI
                result.objective = float(report_problem.objective(pz))
                if result.violation <= opts.tol_feas and result.status in ("max_iter", "stalled"):
                    result.status = "feasible"
    return result


def _solve_al_prepared(problem, z0, opts: SolverOptions) -> SolveResult:
    """Built-in AL run with fixed variables eliminated and slacks attached."""
    report_problem = problem
    reduced = None
    if np.any(np.asarray(problem.lb) >= np.asarray(problem.ub)):
        reduced = ReducedProblem(problem)
        problem = reduced
        z0 = reduced.restrict(z0)
    wrapper = None
    if opts.inner == "trf" and problem.ineq_residual(z0).size:
        wrapper = SlackProblem(problem, z0)
        problem = wrapper
        z0 = wrapper.embed(z0)
    result = _solve_al(problem, z0, opts)
    if wrapper is not None:
        result.z = wrapper.split(result.z)
    if reduced is not None:
        result.z = reduced.embed(result.z)
    if wrapper is not None or reduced is not None:
        _, _, vE, vI = _violations(report_problem, result.z)
        result.eq_violation, result.ineq_violation = vE, vI
        if result.status in ("optimal", "feasible") and result.violation > opts.tol_feas:
            result.status = "max_iter"
    return result


def _solve_ip(problem, z0, opts: SolverOptions) -> SolveResult:
    """Adapter to scipy's trust-constr solver over the same problem contract.

    Tracks the lowest-violation iterate seen (trust-constr itself reports the
    last one) and stops early on a wall-clock budget or when the objective
    plateaus while the iterate is already essentially feasible.
    """
    from scipy.optimize import NonlinearConstraint, minimize as sp_minimize

    t_start = time.perf_counter()
    constraints = []
    if problem.eq_residual(z0).size:
        constraints.append(NonlinearConstraint(
            problem.eq_residual, 0.0, 0.0,
            jac=lambda z: sp.csr_matrix(problem.eq_jacobian(z))))
    if problem.ineq_residual(z0).size:
        constraints.append(NonlinearConstraint(
            problem.ineq_residual, -np.inf, 0.0,
            jac=lambda z: sp.csr_matrix(problem.ineq_jacobian(z))))

    best = {"z": z0.copy(), "viol": np.inf, "fun": np.inf}
    hist = deque(maxlen=max(2, opts.ip_plateau_window))
    stopped = []

    def on_iterate(z, state):
        viol = float(state.constr_violation)
        if (viol, state.fun) < (best["viol"], best["fun"]):
            best["z"], best["viol"], best["fun"] = z.copy(), viol, float(state.fun)
        hist.append(float(state.fun))
        if opts.time_budget and time.perf_counter() - t_start > opts.time_budget:
            stopped.append("time budget")
            return True
        if (len(hist) == hist.maxlen
                and hist[0] - hist[-1] < opts.ip_plateau
                and viol <= max(10.0 * opts.tol_feas, 1e-6)):
            stopped.append("objective plateau")
            return True
        return False

    res = sp_minimize(
        problem.objective, z0, jac=problem.gradient, method="trust-constr",
        bounds=Bounds(np.asarray(problem.lb, float), np.asarray(problem.ub, float)),
        constraints=constraints, callback=on_iterate,
        options=dict(maxiter=opts.ip_maxiter, gtol=opts.ip_gtol,
                     xtol=1e-12, sparse_jacobian=True,
                     verbose=3 if opts.verbose else 0))
    z = res.x
    _, _, vE, vI = _violations(problem, z)
    if max(vE, vI) > best["viol"] and best["fun"] <= res.fun:
        z = best["z"]
        _, _, vE, vI = _violations(problem, z)
    viol = max(vE, vI)
    if stopped:
        log.info("interior-point stop: %s after %d iterations", stopped[0], res.niter)
    if viol <= opts.tol_feas:
        # trust-constr reports status 2 (xtol) both at true optima and at
        # stalls, e.g. on rank-deficient constraint rows; demand a small
        # Lagrangian gradient before claiming optimality.
        stat_ok = res.status == 1 or (
            res.status == 2
            and z is res.x
            and getattr(res, "optimality", np.inf) <= max(opts.tol_stat, 1e2 * opts.ip_gtol))
        status = "optimal" if stat_ok else "feasible"
    elif res.status in (1, 2, 0) or stopped:
        status = "max_iter"
    else:
        status = "diverged"
    g = problem.gradient(z)
    return SolveResult(
        z=z, status=status, objective=float(problem.objective(z)),
        eq_violation=vE, ineq_violation=vI,
        stationarity=float(getattr(res, "optimality", np.linalg.norm(g, np.inf))),
        outer_iters=int(res.niter), inner_iters=int(res.nfev),
        rho=0.0, runtime=time.perf_counter() - t_start,
        history=[{"iter": int(res.niter), "objective": float(res.fun),
                  "violation": float(res.constr_violation), "penalty": 0.0}])


def _solve_al(problem, z0, opts: SolverOptions) -> SolveResult:
    t_start = time.perf_counter()
    lb, ub = problem.lb, problem.ub
    z = np.minimum(np.maximum(np.asarray(z0, dtype=float), lb), ub)

    cE, cI, vE, vI = _violations(problem, z)
    yE = np.zeros_like(cE)
    yI = np.zeros_like(cI)
    rho = opts.rho0
    viol_prev = max(vE, vI)
    history = []
    inner_total = 0
    status = "max_iter"
    stat = np.inf

    def phi(zz):
        f = problem.objective(zz)
        ce = problem.eq_residual(zz)
        ci = problem.ineq_residual(zz)
        tE = yE + rho * ce
        tI = np.maximum(0.0, yI + rho * ci)
        return f + (tE @ tE) / (2 * rho) + (tI @ tI) / (2 * rho)

    def phi_grad(zz):
        f = problem.objective(zz)
        g = problem.gradient(zz)
        ce = problem.eq_residual(zz)
        ci = problem.ineq_residual(zz)
        tE = yE + rho * ce
        tI = np.maximum(0.0, yI + rho * ci)
        val = f + (tE @ tE) / (2 * rho) + (tI @ tI) / (2 * rho)
        grad = g.copy()
        if ce.size:
            grad += problem.eq_jacobian(zz).T @ tE
        if ci.size:
            grad += problem.ineq_jacobian(zz).T @ tI
        return val, grad

    inner_tol = opts.inner_tol0
    outer = 0
    for outer in range(1, opts.max_outer + 1):
        tol_k = max(opts.tol_stat, inner_tol)
        if opts.inner == "scipy":
            res = minimize(phi_grad, z, jac=True, method="L-BFGS-B",
                           bounds=Bounds(lb, ub),
                           options=dict(maxiter=opts.max_inner, maxcor=opts.lbfgs_memory,
                                        ftol=1e-16, gtol=tol_k))
            z, n_inner = res.x, res.nit
            _, g = phi_grad(z)
        elif opts.inner == "trf":
            F0 = max(1.0, 1.0 - 2.0 * float(problem.objective(z)))
            w = np.sqrt(0.5 / rho)

            def ls_fun(x, yE=yE, rho=rho):
                f = problem.objective(x)
                tE = yE + rho * problem.eq_residual(x)
                return np.concatenate([[np.sqrt(max(f + F0, 1e-12))], w * tE])

            def ls_jac(x, yE=yE, rho=rho):
                f = problem.objective(x)
                g = problem.gradient(x)
                JE = problem.eq_jacobian(x)
                r1 = np.sqrt(max(f + F0, 1e-12))
                top = sp.csr_matrix(g[None, :] / (2.0 * r1))
                return sp.vstack([top, (w * rho) * JE], format="csr")

            res = least_squares(ls_fun, z, jac=ls_jac, bounds=(lb, ub), method="trf",
                                max_nfev=opts.max_inner, xtol=1e-10, ftol=1e-12,
                                gtol=None, x_scale="jac", tr_solver="lsmr",
                                tr_options={"atol": 1e-10, "btol": 1e-10})
            z, n_inner = res.x, res.nfev
            _, g = phi_grad(z)
        else:
            z, _, g, n_inner = _projected_lbfgs(phi, phi_grad, z, lb, ub, opts, tol_k)
        inner_total += n_inner

        cE, cI, vE, vI = _violations(problem, z)
        viol = max(vE, vI)
        stat = float(np.abs(z - np.clip(z - g, lb, ub)).max())
        f_val = float(problem.objective(z))
        history.append(dict(iter=outer, objective=f_val, violation=max(vE, vI),
                            penalty=rho, eq=vE, ineq=vI, stat=stat,
                            inner=n_inner))
        if opts.verbose or log.isEnabledFor(logging.DEBUG):
            log.log(logging.INFO if opts.verbose else logging.DEBUG,
                    "AL %2d  f=%11.5g  eq=%9.3g  ineq=%9.3g  stat=%9.3g  rho=%8.2g  inner=%d",
                    outer, f_val, vE, vI, stat, rho, n_inner)
        if not np.all(np.isfinite(z)) or not np.isfinite(f_val):
            status = "diverged"
            break
        if viol <= opts.tol_feas and stat <= opts.tol_stat:
            status = "optimal"
            break

        if viol <= max(opts.sufficient_decrease * viol_prev, opts.tol_feas):
            yE = yE + rho * cE
            yI = np.maximum(0.0, yI + rho * cI)
            viol_prev = viol
            inner_tol = max(opts.tol_stat, inner_tol * opts.inner_tol_shrink)
        else:
            if rho >= opts.rho_max:
                status = "stalled"
                break
            # first-order multiplier refresh still helps when progress is
            # partial; only the penalty carries the pressure increase
            if viol < viol_prev:
                yE = yE + rho * cE
                yI = np.maximum(0.0, yI + rho * cI)
                viol_prev = viol
            rho = min(rho * opts.rho_growth, opts.rho_max)

    cE, cI, vE, vI = _violations(problem, z)
    if status in ("max_iter", "stalled") and max(vE, vI) <= opts.tol_feas:
        status = "feasible"
    return SolveResult(
        z=z, status=status, objective=float(problem.objective(z)),
        eq_violation=vE, ineq_violation=vI, stationarity=stat,
        outer_iters=outer, inner_iters=inner_total, rho=rho,
        runtime=time.perf_counter() - t_start, history=history,
    )


class _BoxOverride:
    """View of a problem with replacement variable bounds."""

    def __init__(self, base, lb, ub):
        self.base = base
        self.lb = lb
        self.ub = ub

    def __getattr__(self, name):
        return getattr(self.base, name)


def polish_feasibility(problem, z, options: SolverOptions = None, pin=None):
    """Gauss-Newton cleanup of the constraint residuals around a solution.

    Solves min ||c_E(z)||^2 + ||c_I(z) + s||^2 over (z, s >= 0) inside the
    box; the slack variables keep the residual smooth so inactive
    inequalities are never dragged into violation while the equalities are
    being driven down.  Variables listed in ``pin`` are held at their current
    values.  Returns (z, eq_violation, ineq_violation) or None if no progress
    was made.
    """
    opts = options or SolverOptions()
    lb = np.asarray(problem.lb, dtype=float)
    ub = np.asarray(problem.ub, dtype=float)
    z = np.clip(np.asarray(z, dtype=float), lb, ub)
    if pin is not None and len(pin):
        lb, ub = lb.copy(), ub.copy()
        lb[pin] = ub[pin] = z[pin]
        problem = _BoxOverride(problem, lb, ub)
    if np.any(lb >= ub):
        red = ReducedProblem(problem)
        got = polish_feasibility(red, red.restrict(z), options)
        return None if got is None else (red.embed(got[0]), got[1], got[2])
    nE = problem.eq_residual(z).size
    nI = problem.ineq_residual(z).size
    if nE + nI == 0:
        return None
    _, _, vE0, vI0 = _violations(problem, z)
    if max(vE0, vI0) <= 1e-13:
        return None    # nothing to gain; a zero-gradient start only drifts
    n = z.size

    def fun(x):
        parts = []
        if nE:
            parts.append(problem.eq_residual(x[:n]))
        if nI:
            parts.append(problem.ineq_residual(x[:n]) + x[n:])
        return np.concatenate(parts)

    def jac(x):
        rows = []
        if nE:
            JE = problem.eq_jacobian(x[:n]).tocsr()
            rows.append(sp.hstack([JE, sp.csr_matrix((nE, nI))]) if nI else JE)
        if nI:
            JI = problem.ineq_jacobian(x[:n]).tocsr()
            rows.append(sp.hstack([JI, sp.identity(nI, format="csr")]))
        return sp.vstack(rows, format="csr") if len(rows) > 1 else rows[0].tocsr()

    s0 = np.maximum(1e-10, -problem.ineq_residual(z)) if nI else np.empty(0)
    x0 = np.concatenate([z, s0])
    x_lb = np.concatenate([lb, np.zeros(nI)])
    x_ub = np.concatenate([ub, np.full(nI, np.inf)])
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            res = least_squares(fun, x0, jac=jac, bounds=(x_lb, x_ub), method="trf",
                                max_nfev=opts.polish_max_nfev, xtol=None,
                                ftol=1e-14, gtol=None, tr_solver="lsmr",
                                tr_options={"atol": 1e-12, "btol": 1e-12})
    except Exception:   # pragma: no cover - scipy internal failure
        return None
    z_new = np.clip(res.x[:n], lb, ub)
    _, _, vE, vI = _violations(problem, z_new)
    _, _, vE0, vI0 = _violations(problem, z)
    if max(vE, vI) >= max(vE0, vI0):
        return None
    return (z_new, vE, vI)


def solve_with_restarts(problem, z0, options: SolverOptions = None,
                        restarts: int = 5, noise: float = 0.05, seed: int = 0):
    """Run the solver, re-seeding from a perturbed incumbent on failure.

    Returns the best result found (feasible preferred, then lowest violation,
    then lowest objective).
    """
    opts = options or SolverOptions()
    rng = np.random.default_rng(seed)
    z0 = np.asarray(z0, dtype=float)
    best = None

    def better(a, b):
        if a is None:
            return False
        if b is None:
            return True
        if a.success != b.success:
            return a.success
        if a.success:
            return a.objective < b.objective
        return a.violation < b.violation

    z_start = z0
    for attempt in range(restarts + 1):
        result = solve(problem, z_start, opts)
        log.debug("attempt %d: %s f=%.5g viol=%.3g",
                  attempt, result.status, result.objective, result.violation)
        if better(result, best):
            best = result
        if result.success and result.status == "optimal":
            break
        scale = np.where(np.isfinite(problem.ub - problem.lb),
                         np.maximum(problem.ub - problem.lb, 1e-3), 1.0)
        incumbent = best.z if best is not None else z0
        z_start = incumbent + noise * scale * rng.standard_normal(problem.n)
    return best


class ScaledProblem:
    """Diagonal change of variables and constraint-row scaling.

    Wraps a problem so the solver sees z_hat = z / var_scale and residuals
    divided by per-row scales; solutions map back through :meth:`unscale`.
    """

    def __init__(self, base, var_scale, eq_scale=None, ineq_scale=None):
        self.base = base
        self.n = base.n
        self.var_scale = np.broadcast_to(np.asarray(var_scale, dtype=float), (base.n,)).copy()
        ne = base.eq_residual(np.clip(np.zeros(base.n), base.lb, base.ub)).size \
            if eq_scale is None else len(eq_scale)
        self.eq_scale = (np.ones(ne) if eq_scale is None
                         else np.asarray(eq_scale, dtype=float))
        self.ineq_scale = None if ineq_scale is None else np.asarray(ineq_scale, dtype=float)
        self.lb = base.lb / self.var_scale
        self.ub = base.ub / self.var_scale
        self._Dv = sp.diags(self.var_scale)

    def unscale(self, z_hat):
        return np.asarray(z_hat) * self.var_scale

    def scale_point(self, z):
        return np.asarray(z) / self.var_scale

    def objective(self, z_hat):
        return self.base.objective(self.unscale(z_hat))

    def gradient(self, z_hat):
        return self.base.gradient(self.unscale(z_hat)) * self.var_scale

    def eq_residual(self, z_hat):
        return self.base.eq_residual(self.unscale(z_hat)) / self.eq_scale

    def eq_jacobian(self, z_hat):
        J = self.base.eq_jacobian(self.unscale(z_hat))
        return sp.diags(1.0 / self.eq_scale) @ J @ self._Dv

    def ineq_residual(self, z_hat):
        r = self.base.ineq_residual(self.unscale(z_hat))
        return r if self.ineq_scale is None else r / self.ineq_scale

    def ineq_jacobian(self, z_hat):
        J = self.base.ineq_jacobian(self.unscale(z_hat)) @ self._Dv
        return J if self.ineq_scale is None else sp.diags(1.0 / self.ineq_scale) @ J


def _row_maxabs(J):
    J = abs(J.tocsr())
    out = np.zeros(J.shape[0])
    m = J.max(axis=1)
    out[: m.shape[0]] = np.asarray(m.todense()).ravel()
    return out


def auto_scaled(problem, z0, var_scale, row_cap=1e6):
    """Scale variables by given magnitudes and rows by Jacobian norms at z0.

    Inequalities keep their natural units so that a scaled-feasible point is
    feasible in the original units too; equality rows are normalized to unit
    leading Jacobian entry (capped), which conditions the penalty Hessian.
    """
    var_scale = np.broadcast_to(np.asarray(var_scale, dtype=float), (problem.n,))
    JE = problem.eq_jacobian(z0) @ sp.diags(var_scale)
    eq_scale = np.clip(_row_maxabs(JE), 1.0, row_cap)
    scaled = ScaledProblem(problem, var_scale, eq_scale)
    return scaled, scaled.scale_point(z0)


def check_gradients(problem, z, n_dirs: int = 40, eps: float = 1e-6, seed: int = 0):
    """Finite-difference audit of all declared derivatives at one point.

    Returns a dict of worst absolute errors; also verifies that the sparse
    Jacobians carry the finite-difference nonzeros inside their patterns.
    """
    rng = np.random.default_rng(seed)
    z = np.asarray(z, dtype=float)
    idx = rng.choice(problem.n, size=min(n_dirs, problem.n), replace=False)
    out = {}

    g = problem.gradient(z)
    worst = 0.0
    for i in idx:
        e = np.zeros(problem.n)
        e[i] = eps
        fd = (problem.objective(z + e) - problem.objective(z - e)) / (2 * eps)
        worst = max(worst, abs(g[i] - fd))
    out["gradient"] = worst

    for kind, res_f, jac_f in (("eq", problem.eq_residual, problem.eq_jacobian),
                               ("ineq", problem.ineq_residual, problem.ineq_jacobian)):
        if res_f(z).size == 0:
            out[kind] = 0.0
            continue
        J = jac_f(z).tocsc()
        pattern = jac_f(z).tolil().rows
        worst = 0.0
        pattern_ok = True
        for i in idx:
            e = np.zeros(problem.n)
            e[i] = eps
            fd = (res_f(z + e) - res_f(z - e)) / (2 * eps)
            col = np.asarray(J[:, i].todense()).ravel()
            worst = max(worst, float(np.abs(col - fd).max()))
            for r in np.nonzero(np.abs(fd) > 1e-5)[0]:
                if i not in pattern[r]:
                    pattern_ok = False
        out[kind] = worst
        out[f"{kind}_pattern_ok"] = pattern_ok
    return out
