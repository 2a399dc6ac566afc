"""Quadrature rules on the reference triangle and the reference segment.

Reference triangle: vertices (0,0), (1,0), (0,1), area 1/2.
Reference segment: [0, 1], length 1.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import UnsupportedError

MAX_TRIANGLE_DEGREE = 19
MAX_SEGMENT_DEGREE = 39


@dataclass(frozen=True)
class QuadratureRule:
    element: str
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def n_points(self):
        return len(self.weights)


def _gauss_segment(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _collapsed_triangle(n):
    # Duffy collapse: Gauss-Jacobi(1,0) absorbs the (1-u) Jacobian factor,
    # exact for polynomials of total degree 2n-1.
    xu, wu = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (xu + 1.0)
    wu = wu / 4.0
    v, wv = _gauss_segment(n)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([U.ravel(), ((1.0 - U) * V).ravel()])
    return pts, W.ravel()


def _radon7():
    s = np.sqrt(15.0)
    a1, a2 = (6.0 - s) / 21.0, (6.0 + s) / 21.0
    w1, w2 = (155.0 - s) / 2400.0, (155.0 + s) / 2400.0
    pts = [(1 / 3, 1 / 3),
           (a1, a1), (1 - 2 * a1, a1), (a1, 1 - 2 * a1),
           (a2, a2), (1 - 2 * a2, a2), (a2, 1 - 2 * a2)]
    wts = [9.0 / 80.0] + [w1] * 3 + [w2] * 3
    return np.array(pts), np.array(wts)


@lru_cache(maxsize=None)
def quadrature_rule(element, degree):
    """Return a positive-weight rule integrating polynomials up to `degree` exactly.

    Raises UnsupportedError above the shipped maximum degree.
    """
    if degree < 0:
        raise UnsupportedError(f"negative quadrature degree {degree}")
    if element == "segment":
        if degree > MAX_SEGMENT_DEGREE:
            raise UnsupportedError(f"segment quadrature degree {degree} > {MAX_SEGMENT_DEGREE}")
        n = max(1, (degree + 2) // 2)
        x, w = _gauss_segment(n)
        return QuadratureRule("segment", x[:, None], w, 2 * n - 1)
    if element == "triangle":
        if degree > MAX_TRIANGLE_DEGREE:
            raise UnsupportedError(f"triangle quadrature degree {degree} > {MAX_TRIANGLE_DEGREE}")
        if degree <= 1:
            return QuadratureRule("triangle", np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1)
        if degree == 2:
            pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
            return QuadratureRule("triangle", pts, np.full(3, 1 / 6), 2)
        if degree <= 5:
            pts, wts = _radon7()
            return QuadratureRule("triangle", pts, wts, 5)
        n = (degree + 2) // 2
        pts, wts = _collapsed_triangle(n)
        return QuadratureRule("triangle", pts, wts, 2 * n - 1)
    raise UnsupportedError(f"unknown reference element {element!r}")


def rule_with_points(element, n_points):
    """Rule chosen by point count, as used for the solid-side coupling quadrature.

    Segments accept any n >= 1 (Gauss-Legendre). Triangles accept 1, 3, 7 or a
    perfect square k*k (collapsed Gauss).
    """
    if n_points < 1:
        raise UnsupportedError("at least one quadrature point is required")
    if element == "segment":
        return quadrature_rule("segment", 2 * n_points - 1)
    if element == "triangle":
        if n_points == 1:
            return quadrature_rule("triangle", 1)
        if n_points == 3:
            return quadrature_rule("triangle", 2)
        if n_points == 7:
            return quadrature_rule("triangle", 5)
        k = int(round(np.sqrt(n_points)))
        if k * k == n_points:
            pts, wts = _collapsed_triangle(k)
            return QuadratureRule("triangle", pts, wts, 2 * k - 1)
        raise UnsupportedError(f"no triangle rule with {n_points} points")
    raise UnsupportedError(f"unknown reference element {element!r}")
