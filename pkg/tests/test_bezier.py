import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitopt import bezier

phases = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
ctrl_values = st.lists(
    st.floats(min_value=-10.0, max_value=10.0, allow_nan=False),
    min_size=6, max_size=6)


@given(phases)
def test_partition_of_unity(s):
    b = bezier.basis(np.array(s))
    assert b.shape == (6,)
    assert abs(b.sum() - 1.0) < 1e-12
    assert np.all(b >= -1e-15)


@given(ctrl_values, phases)
def test_convex_hull(coeffs, s):
    c = np.array(coeffs)
    val = bezier.curve(c, np.array(s))
    assert c.min() - 1e-9 <= val <= c.max() + 1e-9


@given(ctrl_values, phases)
@settings(max_examples=60)
def test_degree_elevation_preserves_curve(coeffs, s):
    c = np.array(coeffs)
    up = bezier.elevate(c)
    assert up.shape[-1] == 7
    v0 = bezier.curve(c, np.array(s))
    v1 = bezier.curve(up, np.array(s))
    assert v0 == pytest.approx(v1, abs=1e-9)


@given(phases)
def test_linear_precision(s):
    # control points on a straight line reproduce that line exactly
    c = np.linspace(0.0, 1.0, 6)
    assert bezier.curve(c, np.array(s)) == pytest.approx(s, abs=1e-12)


def test_endpoint_interpolation():
    c = np.array([2.0, -1.0, 0.5, 3.0, -2.0, 4.0])
    assert bezier.curve(c, np.array(0.0)) == pytest.approx(2.0, abs=1e-14)
    assert bezier.curve(c, np.array(1.0)) == pytest.approx(4.0, abs=1e-14)


def test_endpoint_derivatives_match_control_polygon():
    c = np.array([0.0, 1.0, 0.0, 0.0, 2.0, 5.0])
    d0 = bezier.curve_derivative(c, np.array(0.0))
    d1 = bezier.curve_derivative(c, np.array(1.0))
    assert d0 == pytest.approx(5 * (c[1] - c[0]), rel=1e-12)
    assert d1 == pytest.approx(5 * (c[5] - c[4]), rel=1e-12)


def test_derivative_consistency_with_finite_differences(rng):
    c = rng.standard_normal(6)
    s = np.linspace(0.05, 0.95, 7)
    h = 1e-6
    fd = (bezier.curve(c, s + h) - bezier.curve(c, s - h)) / (2 * h)
    an = bezier.curve_derivative(c, s)
    assert an == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_second_derivative_of_quadratic_is_exact():
    # f(s) = s^2 has Bezier control values k(k-1)/(n(n-1)) on degree 5
    k = np.arange(6)
    c = k * (k - 1) / 20.0
    s = np.linspace(0, 1, 9)
    assert bezier.curve(c, s) == pytest.approx(s ** 2, abs=1e-12)
    assert bezier.curve_derivative(c, s, order=2) == pytest.approx(
        np.full_like(s, 2.0), abs=1e-10)


def test_fit_reproduces_sampled_quintic(rng):
    c_true = rng.standard_normal((3, 6))
    s = np.linspace(0.0, 1.0, 11)
    samples = np.stack([bezier.curve(c, s) for c in c_true], axis=1)
    c_fit = bezier.fit(s, samples)
    assert c_fit.shape == (3, 6)
    assert c_fit == pytest.approx(c_true, abs=1e-9)


def test_phase_maps_domain_to_unit_interval():
    t = np.array([0.2, 0.35, 0.5])
    s = bezier.phase(t, 0.2, 0.5)
    assert s == pytest.approx([0.0, 0.5, 1.0], abs=1e-14)
