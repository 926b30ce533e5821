"""Analytic sanity library and contract tests for the NLP solver."""

import numpy as np
import pytest
import scipy.sparse as sp

from gaitopt.solver import (
    ReducedProblem,
    SolverOptions,
    check_gradients,
    polish_feasibility,
    solve,
    solve_with_restarts,
)


class Problem:
    """Tiny dense test problem implementing the solver contract."""

    def __init__(self, n, f, g, lb=None, ub=None, eq=None, eq_jac=None,
                 ineq=None, ineq_jac=None):
        self.n = n
        self.lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, float)
        self.ub = np.full(n, np.inf) if ub is None else np.asarray(ub, float)
        self._f, self._g = f, g
        self._eq = eq or (lambda z: np.empty(0))
        self._eq_jac = eq_jac or (lambda z: sp.csr_matrix((0, n)))
        self._ineq = ineq or (lambda z: np.empty(0))
        self._ineq_jac = ineq_jac or (lambda z: sp.csr_matrix((0, n)))

    def objective(self, z):
        return float(self._f(z))

    def gradient(self, z):
        return np.asarray(self._g(z), float)

    def eq_residual(self, z):
        return np.atleast_1d(np.asarray(self._eq(z), float))

    def eq_jacobian(self, z):
        return sp.csr_matrix(self._eq_jac(z))

    def ineq_residual(self, z):
        return np.atleast_1d(np.asarray(self._ineq(z), float))

    def ineq_jacobian(self, z):
        return sp.csr_matrix(self._ineq_jac(z))


def active_bound_problem():
    return Problem(1, lambda z: (z[0] - 3) ** 2, lambda z: np.array([2 * (z[0] - 3)]),
                   lb=[5.0], ub=[np.inf])


def equality_problem():
    return Problem(2, lambda z: z @ z, lambda z: 2 * z,
                   eq=lambda z: [z[0] + z[1] - 1.0],
                   eq_jac=lambda z: [[1.0, 1.0]])


def rosenbrock_circle():
    def f(z):
        return (1 - z[0]) ** 2 + 100 * (z[1] - z[0] ** 2) ** 2

    def g(z):
        return np.array([
            -2 * (1 - z[0]) - 400 * z[0] * (z[1] - z[0] ** 2),
            200 * (z[1] - z[0] ** 2),
        ])

    return Problem(2, f, g,
                   ineq=lambda z: [z @ z - 1.0],
                   ineq_jac=lambda z: [[2 * z[0], 2 * z[1]]])


def degenerate_problem():
    # the same equality twice: rank-deficient but consistent
    return Problem(2, lambda z: z @ z, lambda z: 2 * z,
                   eq=lambda z: [z[0] - 1.0, 2 * (z[0] - 1.0)],
                   eq_jac=lambda z: [[1.0, 0.0], [2.0, 0.0]])


def infeasible_problem():
    return Problem(1, lambda z: z[0] ** 2, lambda z: 2 * z,
                   ineq=lambda z: [1.0 - z[0], z[0]],
                   ineq_jac=lambda z: [[-1.0], [1.0]])


BACKENDS = ["al", "ip"]


def test_active_bound():
    res = solve(active_bound_problem(), np.array([7.0]),
                SolverOptions(backend="al"))
    assert res.success
    assert res.z[0] == pytest.approx(5.0, abs=1e-6)


def test_active_bound_ip_barrier_gap():
    # A log-barrier method approaches an active inequality from the interior
    # and stops a small gap short of it; the point must still be feasible and
    # close, but coordinate-exact active sets are the reference backend's job.
    res = solve(active_bound_problem(), np.array([7.0]),
                SolverOptions(backend="ip"))
    assert res.success
    assert res.ineq_violation <= 1e-8
    assert res.z[0] == pytest.approx(5.0, abs=1e-3)


@pytest.mark.parametrize("backend", BACKENDS)
def test_equality_kkt_point(backend):
    res = solve(equality_problem(), np.array([3.0, -2.0]),
                SolverOptions(backend=backend))
    assert res.success
    assert res.z == pytest.approx([0.5, 0.5], abs=1e-6)
    assert res.eq_violation <= 1e-6


def brute_force_rosenbrock(rounds=4, width=1.0, center=(0.0, 0.0)):
    """Grid-refinement oracle for the circle-constrained Rosenbrock."""
    prob = rosenbrock_circle()
    cx, cy = center
    for _ in range(rounds):
        xs = np.linspace(cx - width, cx + width, 201)
        ys = np.linspace(cy - width, cy + width, 201)
        X, Y = np.meshgrid(xs, ys)
        F = (1 - X) ** 2 + 100 * (Y - X ** 2) ** 2
        F[X ** 2 + Y ** 2 > 1.0] = np.inf
        i = np.unravel_index(np.argmin(F), F.shape)
        cx, cy = X[i], Y[i]
        width /= 20.0
    return np.array([cx, cy])


@pytest.mark.parametrize("backend", BACKENDS)
def test_rosenbrock_in_circle_matches_grid_oracle(backend):
    star = brute_force_rosenbrock()
    res = solve(rosenbrock_circle(), np.array([0.0, 0.0]),
                SolverOptions(backend=backend, max_outer=60))
    assert res.success
    assert res.z == pytest.approx(star, abs=1e-4)
    assert res.ineq_violation <= 1e-6


def test_degenerate_equalities_still_solve():
    res = solve(degenerate_problem(), np.array([4.0, 3.0]),
                SolverOptions(backend="al"))
    assert res.success
    assert res.z == pytest.approx([1.0, 0.0], abs=1e-6)


def test_degenerate_equalities_ip_reports_honestly():
    # scipy's trust-constr stalls on duplicated constraint rows (singular
    # Jacobian -> dense SVD fallback); it must still reach feasibility and
    # must not claim optimality at a point with a large projected gradient.
    res = solve(degenerate_problem(), np.array([4.0, 3.0]),
                SolverOptions(backend="ip", polish=False))
    assert res.success
    assert res.z[0] == pytest.approx(1.0, abs=1e-6)
    if abs(res.z[1]) > 1e-6:
        assert res.status == "feasible"


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible_problem_never_optimal(backend):
    opts = SolverOptions(backend=backend, max_outer=12, ip_maxiter=300,
                         polish=False)
    res = solve(infeasible_problem(), np.array([0.5]), opts)
    assert res.status in ("max_iter", "diverged")
    assert res.violation >= 0.4   # the gap 1 - x + x is 1 everywhere


def test_bad_initial_point_rejected():
    prob = equality_problem()
    with pytest.raises(ValueError, match="bad initial point"):
        solve(prob, np.array([np.nan, 0.0]))


def test_solve_is_deterministic():
    prob = rosenbrock_circle()
    a = solve(prob, np.array([-0.3, 0.4]), SolverOptions())
    b = solve(prob, np.array([-0.3, 0.4]), SolverOptions())
    assert np.array_equal(a.z, b.z)
    assert a.status == b.status
    assert a.outer_iters == b.outer_iters


def test_violation_monotone_over_accepted_outers():
    prob = equality_problem()
    res = solve(prob, np.array([5.0, -7.0]), SolverOptions(backend="al"))
    viols = [h["violation"] for h in res.history]
    best = np.inf
    accepted = []
    for v in viols:
        if v < best:
            best = v
            accepted.append(v)
    # accepted outer iterations must make up most of the trace and decrease
    assert len(accepted) >= 1
    assert all(x > y for x, y in zip(accepted, accepted[1:]))


def test_fixed_variables_are_respected():
    prob = Problem(2, lambda z: (z[0] - 2) ** 2 + (z[1] - 2) ** 2,
                   lambda z: 2 * (z - 2), lb=[0.7, -1.0], ub=[0.7, 5.0])
    for backend in BACKENDS:
        res = solve(prob, np.array([0.7, 0.0]), SolverOptions(backend=backend))
        assert res.z[0] == pytest.approx(0.7, abs=1e-9)
        assert res.z[1] == pytest.approx(2.0, abs=1e-5)
    red = ReducedProblem(prob)
    assert red.n == 1
    assert red.embed(np.array([3.0])) == pytest.approx([0.7, 3.0])


def test_check_gradients_flags_injected_fault():
    good = rosenbrock_circle()
    rep = check_gradients(good, np.array([0.3, -0.2]))
    assert rep["gradient"] <= 1e-5
    assert rep["ineq"] <= 1e-5
    assert rep["ineq_pattern_ok"]

    bad = rosenbrock_circle()
    true_grad = bad._g

    def broken(z):
        g = np.asarray(true_grad(z), float).copy()
        g[1] += 1.0
        return g

    bad._g = broken
    rep_bad = check_gradients(bad, np.array([0.3, -0.2]))
    assert rep_bad["gradient"] > 0.5


def test_check_gradients_quadratic_is_exact():
    prob = Problem(3, lambda z: z @ z, lambda z: 2 * z)
    rep = check_gradients(prob, np.array([0.4, -1.2, 2.0]))
    assert rep["gradient"] <= 1e-9


def test_polish_feasibility_improves_near_feasible_point():
    prob = equality_problem()
    z = np.array([0.52, 0.52])     # violates x+y=1 by 0.04
    got = polish_feasibility(prob, z, SolverOptions())
    assert got is not None
    z_new, vE, vI = got
    assert vE <= 1e-10
    assert vI == 0.0


def test_restarts_recover_from_poor_start():
    prob = rosenbrock_circle()
    res = solve_with_restarts(prob, np.array([-0.95, 0.0]),
                              SolverOptions(max_outer=60), restarts=3,
                              noise=0.1, seed=4)
    assert res.success
