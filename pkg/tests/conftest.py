import numpy as np
import pytest

from gaitopt.dynamics import NQ, NU
from gaitopt.model import default_model
from gaitopt.transcription import DomainTraj, GaitSolution


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_state(rng, base_z=(0.25, 0.45)):
    """A generic configuration/velocity pair away from joint stops."""
    q = np.empty(NQ)
    q[0] = rng.uniform(-1.0, 1.0)
    q[1] = rng.uniform(*base_z)
    q[2] = rng.uniform(-0.5, 0.5)
    q[3] = rng.uniform(-1.8, 0.8)    # thigh range interior
    q[4] = rng.uniform(0.8, 2.4)     # calf range interior
    q[5] = rng.uniform(-1.8, 0.8)
    q[6] = rng.uniform(0.8, 2.4)
    v = rng.uniform(-2.0, 2.0, NQ)
    return q, v


def synthetic_pronk_solution(nodes=10, duration=0.1, speed=2.0):
    """A hand-built two-domain solution with simple, checkable numbers.

    Stance holds the configuration still (zero joint rates) while the base
    slides forward; flight continues at the same velocity.  It is not
    dynamically consistent -- it exists so analysis and persistence tests
    have exact closed-form expectations.
    """
    n1 = nodes + 1
    q_ref = np.array([0.0, 0.32, 0.0, -0.75, 1.55, -0.75, 1.55])
    doms = []
    x0 = 0.0
    for d in range(2):
        t = np.linspace(0.0, duration, n1)
        q = np.tile(q_ref, (n1, 1))
        q[:, 0] = x0 + speed * t
        v = np.zeros((n1, NQ))
        v[:, 0] = speed
        tau = np.zeros((n1, NU))
        lam = np.zeros((n1, 4)) if d == 0 else np.zeros((n1, 0))
        if d == 0:
            lam[:, 1] = lam[:, 3] = 0.5 * 12.45 * 9.81
        coeffs = np.tile(q_ref[3:], (6, 1)).T
        doms.append(DomainTraj(duration=duration, q=q, v=v, tau=tau,
                               lam=lam, coeffs=coeffs))
        x0 += speed * duration
    return GaitSolution(gait_name="pronk", speed=speed, domains=doms,
                        objective=0.0, eq_violation=0.0, ineq_violation=0.0,
                        status="optimal")


@pytest.fixture()
def fake_pronk():
    return synthetic_pronk_solution()
