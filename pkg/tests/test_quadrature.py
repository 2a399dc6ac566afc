from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ibfem.errors import UnsupportedError
from ibfem.quadrature import quadrature_rule, rule_with_points


def exact_triangle_monomial(i, j):
    # int_T x^i y^j over the unit reference triangle
    return factorial(i) * factorial(j) / factorial(i + j + 2)


def test_triangle_degree_two_xy():
    r = quadrature_rule("triangle", 2)
    x, y = r.points.T
    assert r.weights @ (x * y) == pytest.approx(1 / 24, abs=1e-15)


def test_segment_degree_one_is_midpoint():
    r = quadrature_rule("segment", 1)
    assert r.n_points == 1
    assert r.weights[0] == pytest.approx(1.0)
    assert r.points[0, 0] == pytest.approx(0.5)


def test_triangle_degree_zero_weight_sum():
    assert quadrature_rule("triangle", 0).weights.sum() == pytest.approx(0.5, abs=1e-16)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 12), st.data())
def test_triangle_exact_up_to_degree(degree, data):
    r = quadrature_rule("triangle", degree)
    i = data.draw(st.integers(0, degree))
    j = data.draw(st.integers(0, degree - i))
    x, y = r.points.T
    got = r.weights @ (x ** i * y ** j)
    assert got == pytest.approx(exact_triangle_monomial(i, j), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 25), st.data())
def test_segment_exact_up_to_degree(degree, data):
    r = quadrature_rule("segment", degree)
    k = data.draw(st.integers(0, degree))
    assert r.weights @ r.points[:, 0] ** k == pytest.approx(1 / (k + 1), rel=1e-12)


def test_weights_positive_and_points_inside():
    for d in range(0, 20):
        r = quadrature_rule("triangle", d)
        assert np.all(r.weights > 0)
        assert np.all(r.points >= -1e-15) and np.all(r.points.sum(1) <= 1 + 1e-15)


def test_rule_with_points():
    assert rule_with_points("segment", 6).n_points == 6
    assert rule_with_points("triangle", 7).n_points == 7
    assert rule_with_points("triangle", 16).n_points == 16


def test_bad_requests():
    with pytest.raises(UnsupportedError):
        quadrature_rule("square", 2)
    with pytest.raises(UnsupportedError):
        quadrature_rule("triangle", 500)
    with pytest.raises(UnsupportedError):
        rule_with_points("triangle", 5)
