"""Metric and momentum post-processing against hand-computable cases."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from gaitopt.analysis import (JOINT_NAMES, WorkLedger, angular_momentum,
                              center_of_mass, compute_metrics, momentum_trace)
from gaitopt.dynamics import NQ, accel_explicit, link_com_points
from gaitopt.gaits import gait_by_name
from gaitopt.transcription import DomainTraj, GaitSolution

from conftest import random_state, synthetic_pronk_solution


def two_domain_plan(duration=1.0, speed=1.0, tau0=1.0, qd0=1.0):
    """Pronk-shaped plan where only the front thigh does work.

    Stance: tau = tau0 on the front thigh at rate qd0, so pair power is
    2*tau0*qd0; flight: everything off.  One cycle covers 2*duration seconds
    and speed*2*duration meters.
    """
    n1 = 8
    doms = []
    x0 = 0.0
    for d in range(2):
        t = np.linspace(0.0, duration, n1)
        q = np.tile(np.array([0.0, 0.32, 0.0, -0.75, 1.55, -0.75, 1.55]), (n1, 1))
        q[:, 0] = x0 + speed * t
        v = np.zeros((n1, NQ))
        v[:, 0] = speed
        tau = np.zeros((n1, 4))
        if d == 0:
            v[:, 3] = qd0
            tau[:, 0] = tau0
        lam = np.zeros((n1, 4)) if d == 0 else np.zeros((n1, 0))
        coeffs = np.tile(q[0, 3:], (6, 1)).T
        doms.append(DomainTraj(duration=duration, q=q, v=v, tau=tau,
                               lam=lam, coeffs=coeffs))
        x0 += speed * duration
    return GaitSolution(gait_name="pronk", speed=speed, domains=doms)


def test_cost_of_transport_hand_value(model):
    sol = two_domain_plan()
    m = compute_metrics(model, sol)
    # 2 W of pair power for 1 s over 2 m of travel
    assert m.cost_of_transport == pytest.approx(2.0 / (12.45 * 9.81 * 2.0), rel=1e-6)
    assert m.speed == pytest.approx(1.0)
    assert m.stride_length == pytest.approx(2.0)
    assert m.stride_time == pytest.approx(2.0)
    assert m.stride_frequency == pytest.approx(0.5)


def test_work_ledger_routing(model):
    sol = two_domain_plan()
    m = compute_metrics(model, sol)
    assert m.actuator_work.positive == pytest.approx(2.0, rel=1e-9)
    assert m.actuator_work.negative == 0.0
    assert m.work_by_joint[("thigh_front", "stance")].positive == pytest.approx(2.0)
    assert m.work_by_joint[("thigh_front", "swing")].positive == 0.0
    for j in JOINT_NAMES[1:]:
        for ph in ("stance", "swing"):
            assert m.work_by_joint[(j, ph)].total_magnitude == 0.0
    # braking shows up in the negative column
    neg = compute_metrics(model, two_domain_plan(tau0=-1.0))
    assert neg.actuator_work.negative == pytest.approx(-2.0)
    assert neg.actuator_work.positive == 0.0
    assert neg.actuator_work.net == pytest.approx(-2.0)
    assert neg.actuator_work.total_magnitude == pytest.approx(2.0)


def test_duty_factor_and_peaks(model, fake_pronk):
    m = compute_metrics(model, fake_pronk)
    assert m.duty_factor == pytest.approx(0.5)
    for leg, df in m.duty_factor_per_leg.items():
        assert df == pytest.approx(0.5)
    assert m.peak_force == pytest.approx(0.5 * 12.45 * 9.81)
    assert m.peak_torque == 0.0
    assert m.apex_height == pytest.approx(0.32)
    assert m.cost_of_transport == 0.0


def test_joint_ledgers_refine_leg_ledgers(model, rng):
    """Per-joint positive work can exceed the per-leg split, never the nets."""
    sol = synthetic_pronk_solution()
    for dom in sol.domains:
        dom.tau[:] = rng.normal(scale=3.0, size=dom.tau.shape)
        dom.v[:, 3:] = rng.normal(scale=1.0, size=(dom.v.shape[0], 4))
    m = compute_metrics(model, sol)
    net_joint = sum(l.net for l in m.work_by_joint.values())
    net_phase = sum(l.net for l in m.work_by_phase.values())
    pos_joint = sum(l.positive for l in m.work_by_joint.values())
    pos_phase = sum(l.positive for l in m.work_by_phase.values())
    assert net_joint == pytest.approx(net_phase, rel=1e-9)
    assert net_joint == pytest.approx(m.actuator_work.net, rel=1e-9)
    assert pos_joint >= pos_phase - 1e-12
    assert m.actuator_work.positive == pytest.approx(pos_phase, rel=1e-9)


def test_as_row_is_flat_and_complete(model, fake_pronk):
    row = compute_metrics(model, fake_pronk).as_row()
    assert row["gait"] == "pronk"
    for key in ("speed", "cost_of_transport", "duty_factor_front",
                "duty_factor_rear", "work_positive", "peak_force"):
        assert isinstance(row[key], (int, float, str))
    for j in JOINT_NAMES:
        assert f"work_{j}_stance_pos" in row
        assert f"work_{j}_swing_neg" in row


def test_center_of_mass_velocity_is_position_rate(model, rng):
    q, v = random_state(rng)
    com, vcom = center_of_mass(model, q, v)
    h = 1e-7
    fd = (center_of_mass(model, q + h * v) - center_of_mass(model, q - h * v)) / (2 * h)
    assert vcom == pytest.approx(fd, abs=1e-6)
    # against the raw mass-weighted definition
    pts = link_com_points(model)
    masses = model.link_masses()
    manual = sum(masses[n] * pts[n].position(q) for n in masses) / sum(masses.values())
    assert com == pytest.approx(manual, abs=1e-12)


def test_angular_momentum_groups_and_linearity(model, rng):
    q, v = random_state(rng)
    L = angular_momentum(model, q, v)
    assert set(L) == {"torso", "front_legs", "rear_legs", "total"}
    assert L["total"] == pytest.approx(
        L["torso"] + L["front_legs"] + L["rear_legs"], abs=1e-12)
    L2 = angular_momentum(model, q, 2.0 * v)
    for k in L:
        assert L2[k] == pytest.approx(2.0 * L[k], rel=1e-12)


def test_angular_momentum_conserved_in_passive_flight(model, rng):
    q0, v0 = random_state(rng, base_z=(0.8, 0.9))
    v0[1] = 1.5     # throw upward so nothing approaches the ground

    def rhs(t, x):
        a = accel_explicit(model, x[:NQ], x[NQ:], np.zeros(4), np.zeros(0), ())
        return np.concatenate([x[NQ:], a])

    ivp = solve_ivp(rhs, (0.0, 0.25), np.concatenate([q0, v0]),
                    rtol=1e-11, atol=1e-12, dense_output=True)
    assert ivp.success
    ts = np.linspace(0.0, 0.25, 40)
    X = ivp.sol(ts)
    L = angular_momentum(model, X[:NQ].T, X[NQ:].T)
    scale = max(1.0, np.abs(L["total"][0]))
    assert np.max(np.abs(L["total"] - L["total"][0])) / scale < 1e-8
    # the legs trade momentum with the torso, never create it
    recon = L["torso"] + L["front_legs"] + L["rear_legs"]
    assert np.max(np.abs(recon - L["total"])) < 1e-14


def test_momentum_trace_spans_the_cycle(model, fake_pronk):
    t, groups = momentum_trace(model, fake_pronk)
    n = sum(d.q.shape[0] for d in fake_pronk.domains)
    assert t.shape == (n,)
    assert np.all(np.diff(t) >= 0)
    assert t[-1] == pytest.approx(fake_pronk.cycle_duration)
    for k in ("torso", "front_legs", "rear_legs", "total"):
        assert groups[k].shape == (n,)
    # zero joint rates and zero pitch rate: everything is pure translation
    assert np.max(np.abs(groups["total"])) < 1e-12


def test_work_ledger_arithmetic():
    led = WorkLedger()
    led.add(3.0, -1.0)
    led.add(0.5, -0.25)
    assert led.positive == 3.5
    assert led.negative == -1.25
    assert led.net == pytest.approx(2.25)
    assert led.total_magnitude == pytest.approx(4.75)
