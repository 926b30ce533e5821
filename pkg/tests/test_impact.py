"""Plastic-impact oracles: energy dissipation, momentum, idempotence."""

import numpy as np
import pytest

from gaitopt.dynamics import (
    NQ,
    ContactSet,
    Leg,
    contact_jacobian,
    foot_point,
    impact_map,
    kinetic_energy,
    link_com_points,
    mass_matrix,
    reset_matrix,
    reset_matrix_dq,
)

from conftest import random_state


def _link_table(model):
    """(COM point, mass, inertia, angular-rate rows) for each planar link."""
    pts = link_com_points(model)
    e = np.eye(NQ)
    return [
        (pts["torso"], model.torso_mass, model.torso_inertia, e[2]),
        (pts["front_thigh"], model.thigh_mass, model.thigh_inertia, e[2] + e[3]),
        (pts["front_calf"], model.calf_mass, model.calf_inertia, e[2] + e[3] + e[4]),
        (pts["rear_thigh"], model.thigh_mass, model.thigh_inertia, e[2] + e[5]),
        (pts["rear_calf"], model.calf_mass, model.calf_inertia, e[2] + e[5] + e[6]),
    ]


def angular_momentum_about(model, q, v, point):
    """Planar angular momentum of the whole linkage about a world point."""
    total = 0.0
    for pt, mass, inertia, ang_rows in _link_table(model):
        p = pt.position(q)
        pd = pt.velocity(q, v)
        r = p - point
        omega = float(ang_rows @ v)
        total += mass * (r[0] * pd[1] - r[1] * pd[0]) + inertia * omega
    return total


def test_kinetic_energy_never_increases(model):
    rng = np.random.default_rng(7)
    sets = [ContactSet((Leg.FRONT,)), ContactSet((Leg.REAR,)),
            ContactSet((Leg.FRONT, Leg.REAR))]
    for k in range(1000):
        q, v = random_state(rng)
        cs = sets[k % 3]
        v_plus, _ = impact_map(model, q, v, cs)
        ke_minus = kinetic_energy(model, q, v)
        ke_plus = kinetic_energy(model, q, v_plus)
        assert ke_plus <= ke_minus + 1e-9 * max(1.0, ke_minus)


def test_post_impact_foot_velocity_is_zero(model, rng):
    for _ in range(50):
        q, v = random_state(rng)
        cs = ContactSet((Leg.FRONT, Leg.REAR))
        v_plus, impulses = impact_map(model, q, v, cs)
        J = contact_jacobian(model, q, cs.legs)
        assert np.max(np.abs(J @ v_plus)) < 1e-9
        assert set(impulses) == {Leg.FRONT, Leg.REAR}


def test_single_contact_conserves_momentum_about_toe(model, rng):
    for _ in range(200):
        q, v = random_state(rng)
        leg = Leg.FRONT if rng.random() < 0.5 else Leg.REAR
        v_plus, _ = impact_map(model, q, v, ContactSet((leg,)))
        toe = foot_point(model, leg).position(q)
        L_minus = angular_momentum_about(model, q, v, toe)
        L_plus = angular_momentum_about(model, q, v_plus, toe)
        assert abs(L_plus - L_minus) < 1e-9 * max(1.0, abs(L_minus))


def test_impact_is_idempotent(model, rng):
    for _ in range(50):
        q, v = random_state(rng)
        cs = ContactSet((Leg.FRONT,))
        v1, imp1 = impact_map(model, q, v, cs)
        v2, imp2 = impact_map(model, q, v1, cs)
        assert v2 == pytest.approx(v1, abs=1e-10)
        assert abs(imp1[Leg.FRONT] @ imp1[Leg.FRONT]) > 0 or np.allclose(v, v1)
        assert np.max(np.abs(imp2[Leg.FRONT])) < 1e-9


def test_reset_matrix_reproduces_impact(model, rng):
    q, v = random_state(rng)
    legs = (Leg.FRONT, Leg.REAR)
    P = reset_matrix(model, q, legs)
    v_plus, _ = impact_map(model, q, v, ContactSet(legs))
    assert P @ v == pytest.approx(v_plus, abs=1e-10)
    # projector property: applying the reset twice changes nothing
    assert P @ P == pytest.approx(P, abs=1e-9)


def test_reset_matrix_gradient_matches_fd(model, rng):
    q, _ = random_state(rng)
    legs = (Leg.REAR,)
    dP = reset_matrix_dq(model, q, legs)
    h = 1e-6
    fd = np.zeros_like(dP)
    for k in range(NQ):
        qp, qm = q.copy(), q.copy()
        qp[k] += h
        qm[k] -= h
        fd[..., k] = (reset_matrix(model, qp, legs)
                      - reset_matrix(model, qm, legs)) / (2 * h)
    assert np.max(np.abs(dP - fd)) < 1e-5


def test_impulse_direction_pushes_up_on_falling_robot(model):
    # dropping straight down, both feet must receive upward impulses
    q = np.array([0.0, 0.30, 0.0, -0.8, 1.6, -0.8, 1.6])
    v = np.zeros(NQ)
    v[1] = -1.0
    _, impulses = impact_map(model, q, v, ContactSet((Leg.FRONT, Leg.REAR)))
    for leg, imp in impulses.items():
        assert imp[1] > 0.0
