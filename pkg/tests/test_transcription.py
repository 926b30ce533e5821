"""Structure and derivative checks for the collocation transcription."""

import numpy as np
import pytest

from gaitopt.gaits import GAITS, gait_by_name
from gaitopt.transcription import (Transcription, TranscriptionOptions,
                                   initial_guess, standing_pose)

ALL_GAITS = sorted(GAITS)


def make_trans(model, name, nodes=6, speed=2.0):
    return Transcription(model, gait_by_name(name),
                         TranscriptionOptions(speed=speed, nodes=nodes))


def random_points(trans, count, seed=0, scale=0.15):
    """Interior points near the seeded guess, clipped into the box."""
    rng = np.random.default_rng(seed)
    z0 = initial_guess(trans)
    s = trans.variable_scales()
    lb = np.where(np.isfinite(trans.lb), trans.lb, -1e6)
    ub = np.where(np.isfinite(trans.ub), trans.ub, 1e6)
    pts = []
    for _ in range(count):
        z = z0 + scale * s * rng.standard_normal(trans.n)
        pts.append(np.clip(z, lb + 1e-9, ub - 1e-9))
    return pts


def directional_errors(trans, z, rng, n_dirs=3, h=1e-6):
    """Worst relative error of gradient/Jacobian directional derivatives."""
    s = trans.variable_scales()
    worst = {"grad": 0.0, "eq": 0.0, "ineq": 0.0}
    g = trans.gradient(z)
    JE = trans.eq_jacobian(z)
    JI = trans.ineq_jacobian(z)
    for _ in range(n_dirs):
        u = rng.standard_normal(trans.n) * s
        u /= np.linalg.norm(u)
        zp, zm = z + h * u, z - h * u

        d_an = float(g @ u)
        d_fd = (trans.objective(zp) - trans.objective(zm)) / (2 * h)
        worst["grad"] = max(worst["grad"], abs(d_fd - d_an) / max(1.0, abs(d_an)))

        for key, J, res in (("eq", JE, trans.eq_residual),
                            ("ineq", JI, trans.ineq_residual)):
            d_an = J @ u
            d_fd = (res(zp) - res(zm)) / (2 * h)
            err = np.abs(d_fd - d_an) / np.maximum(1.0, np.abs(d_an))
            worst[key] = max(worst[key], float(err.max()))
    return worst


@pytest.mark.parametrize("name", ALL_GAITS)
def test_directional_derivatives_match_finite_differences(model, name):
    """Analytic gradient and Jacobians agree with central differences to 1e-5
    at ten random points per gait."""
    trans = make_trans(model, name)
    rng = np.random.default_rng(7)
    for z in random_points(trans, 10, seed=hash(name) % 2**32):
        worst = directional_errors(trans, z, rng)
        assert worst["grad"] <= 1e-5, worst
        assert worst["eq"] <= 1e-5, worst
        assert worst["ineq"] <= 1e-5, worst


@pytest.mark.parametrize("name", ALL_GAITS)
def test_pack_unpack_round_trip(model, name):
    trans = make_trans(model, name)
    z = initial_guess(trans)
    trajs = trans.unpack(z)
    assert len(trajs) == trans.gait.n_domains
    z2 = trans.pack(trajs)
    assert np.allclose(z, z2, atol=0, rtol=0)


def test_initial_guess_is_inside_the_box(model):
    for name in ALL_GAITS:
        trans = make_trans(model, name)
        z = initial_guess(trans)
        assert np.all(np.isfinite(z))
        assert np.all(z >= trans.lb - 1e-12)
        assert np.all(z <= trans.ub + 1e-12)
        assert np.isfinite(trans.objective(z))
        assert np.all(np.isfinite(trans.eq_residual(z)))
        assert np.all(np.isfinite(trans.ineq_residual(z)))


def test_constraint_blocks_are_contiguous_and_sized(model):
    trans = make_trans(model, "pf", nodes=5)
    N = trans.options.nodes
    # defect blocks cover N interval equations of 7 states each
    sl = trans.constraint_slice("defect_q[0]")
    assert sl.stop - sl.start == N * 7
    sl = trans.constraint_slice("defect_v[1]")
    assert sl.stop - sl.start == N * 7
    # periodic closure drops the fore-aft position row
    t_last = len(trans.gait.transitions) - 1
    sl = trans.constraint_slice(f"q_cont[{t_last}]")
    assert sl.stop - sl.start == 6
    sl = trans.constraint_slice("speed")
    assert sl.stop - sl.start == 1
    # the index tiles the residual exactly
    assert trans.eq_index[0][1] == 0
    for (_, a, b), (_, a2, _b2) in zip(trans.eq_index, trans.eq_index[1:]):
        assert b == a2
    assert trans.eq_index[-1][2] == trans.n_eq == trans.eq_residual(
        initial_guess(trans)).size
    with pytest.raises(KeyError):
        trans.constraint_slice("no_such_block")


def test_jacobian_sparsity_covers_perturbation_footprint(model):
    """Entries that move under coordinate perturbations are in the pattern."""
    trans = make_trans(model, "bg", nodes=4)
    z = initial_guess(trans)
    rows, cols, _ = trans.eq_jacobian_triplets(z)
    pattern = set(zip(rows.tolist(), cols.tolist()))
    r0 = trans.eq_residual(z)
    rng = np.random.default_rng(3)
    for j in rng.choice(trans.n, size=25, replace=False):
        zp = z.copy()
        zp[j] += 1e-5
        moved = np.nonzero(np.abs(trans.eq_residual(zp) - r0) > 1e-11)[0]
        for i in moved:
            assert (int(i), int(j)) in pattern


def test_speed_row_pins_average_velocity(model):
    trans = make_trans(model, "pf", speed=1.7)
    z = initial_guess(trans)
    sol = trans.solution(z)
    sl = trans.constraint_slice("speed")
    r = trans.eq_residual(z)[sl][0]
    assert r == pytest.approx(sol.stride_length - 1.7 * sol.cycle_duration, abs=1e-9)


def test_solution_reports_gait_and_durations(model):
    trans = make_trans(model, "b2")
    z = initial_guess(trans)
    sol = trans.solution(z, status="guess")
    assert sol.gait_name == "bound_double_flight"
    assert sol.speed == 2.0
    assert len(sol.domains) == 4
    assert sol.cycle_duration == pytest.approx(sum(d.duration for d in sol.domains))
    assert sol.status == "guess"
    for d in sol.domains:
        assert d.q.shape == (trans.options.nodes + 1, 7)
        assert d.tau.shape == (trans.options.nodes + 1, 4)


def test_variable_scales_are_positive_and_sized(model):
    trans = make_trans(model, "be")
    s = trans.variable_scales()
    assert s.shape == (trans.n,)
    assert np.all(s > 0)
    assert np.all(np.isfinite(s))


def test_standing_pose_feet_on_ground(model):
    from gaitopt.dynamics import Leg, foot_point
    q = standing_pose(model)
    for leg in Leg:
        assert abs(foot_point(model, leg).position(q)[1]) < 1e-9
