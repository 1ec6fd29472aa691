"""Quadrature on the reference triangle {(0,0), (1,0), (0,1)}."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 14


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (npts, 2) reference coordinates
    weights: np.ndarray  # (npts,), sums to 1/2
    degree: int

    def __len__(self):
        return len(self.weights)


def _collapsed_gauss(degree):
    # Duffy collapse of [-1,1]^2 onto the triangle; the (1 - eta) factor of
    # the collapse Jacobian is absorbed into a Gauss-Jacobi(1, 0) rule.
    n = max(1, math.ceil((degree + 1) / 2))
    xi, wx = roots_legendre(n)
    eta, wy = roots_jacobi(n, 1.0, 0.0)
    X, E = np.meshgrid(xi, eta, indexing="ij")
    WX, WE = np.meshgrid(wx, wy, indexing="ij")
    p1 = 0.25 * (1.0 + X) * (1.0 - E)
    p2 = 0.5 * (1.0 + E)
    pts = np.column_stack([p1.ravel(), p2.ravel()])
    w = (WX * WE).ravel() / 8.0
    return pts, w


_CACHE = {}


def simplex_quadrature(degree):
    """Rule exact for polynomials of total degree <= ``degree`` on the reference triangle."""
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be an integer in [1, {MAX_DEGREE}], got {degree!r}")
    degree = int(degree)
    if degree not in _CACHE:
        if degree == 1:
            pts, w = np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5])
        else:
            pts, w = _collapsed_gauss(degree)
        pts.setflags(write=False)
        w.setflags(write=False)
        _CACHE[degree] = QuadratureRule(pts, w, degree)
    return _CACHE[degree]


def gauss_legendre_unit(n):
    """n-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_quadrature(rule, s):
    """Apply ``rule`` on each of the s^2 congruent sub-triangles of the reference triangle.

    Keeps the polynomial degree of ``rule`` but integrates piecewise smooth
    functions (such as a field composed with a displaced map) far more
    accurately.
    """
    if int(s) != s or s < 1:
        raise ValueError(f"subdivision count must be a positive integer, got {s!r}")
    s = int(s)
    if s == 1:
        return rule
    x, y = rule.points[:, 0], rule.points[:, 1]
    pts = []
    for j in range(s):
        for i in range(s - j):
            pts.append(np.column_stack([i + x, j + y]))            # upward
            if i + j < s - 1:
                pts.append(np.column_stack([i + 1 - x, j + 1 - y]))  # downward
    pts = np.vstack(pts) / s
    w = np.tile(rule.weights, s * s) / (s * s)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, rule.degree)
