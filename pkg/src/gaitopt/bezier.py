"""Bernstein-basis polynomials for joint reference curves.

Each actuated joint gets a degree-5 Bezier polynomial in the domain phase
``s in [0, 1]``; stacking one row of six control values per joint gives the
4 x 6 coefficient block carried by every contact domain.
"""

import math

import numpy as np

DEGREE = 5


def basis(s, degree=DEGREE):
    """Bernstein basis row(s); shape ``s.shape + (degree + 1,)``."""
    s = np.asarray(s, dtype=float)
    r = np.arange(degree + 1)
    binom = np.array([math.comb(degree, k) for k in r], dtype=float)
    return binom * s[..., None] ** r * (1.0 - s[..., None]) ** (degree - r)


def curve(coeffs, s):
    """Evaluate a Bezier curve at phase ``s``.

    ``coeffs`` is (..., degree+1); trailing axes of coeffs broadcast against
    ``s``.  Returns coeffs[..., 0] shape broadcast with s.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    return np.einsum("...r,...r->...", basis(s, coeffs.shape[-1] - 1), coeffs)


def derivative_coeffs(coeffs):
    """Control points of the derivative curve (degree drops by one)."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1] - 1
    return n * np.diff(coeffs, axis=-1)


def curve_derivative(coeffs, s, order=1):
    """d^order/ds^order of the curve at phase ``s``."""
    c = np.asarray(coeffs, dtype=float)
    for _ in range(order):
        c = derivative_coeffs(c)
    return curve(c, s)


def basis_derivative(s, degree=DEGREE, order=1):
    """Row mapping control values directly to the curve's phase derivative.

    Returns D with  d^order h / ds^order = D @ coeffs  for an original
    degree-``degree`` curve; shape ``s.shape + (degree + 1,)``.
    """
    # derivative of the control polygon is a linear map: repeated differencing
    diff = np.eye(degree + 1)
    deg = degree
    for _ in range(order):
        diff = deg * np.diff(diff, axis=0)
        deg -= 1
    return basis(np.asarray(s, dtype=float), deg) @ diff


def phase(t, t0, t1):
    """Affine phase map of time onto [0, 1] over a domain."""
    return (np.asarray(t, dtype=float) - t0) / (t1 - t0)


def elevate(coeffs):
    """Degree-elevate by one without changing the curve."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1] - 1
    out = np.zeros(coeffs.shape[:-1] + (n + 2,))
    k = np.arange(1, n + 1)
    out[..., 0] = coeffs[..., 0]
    out[..., -1] = coeffs[..., -1]
    out[..., 1:-1] = (k / (n + 1.0)) * coeffs[..., :-1] + (1.0 - k / (n + 1.0)) * coeffs[..., 1:]
    return out


def fit(s, values, degree=DEGREE):
    """Least-squares control values reproducing samples ``values`` at ``s``."""
    A = basis(np.asarray(s, dtype=float), degree)
    values = np.asarray(values, dtype=float)
    sol, *_ = np.linalg.lstsq(A, values, rcond=None)
    return sol.T if values.ndim > 1 else sol
