import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ibfem.diagnostics import TimeSeries, area_drift_rate, eccentricity, enclosed_area, relative_change
from ibfem.errors import InvalidArgumentError
from ibfem.geometry import LagrangianMesh, build_lagrangian_curve, build_lagrangian_disc
from ibfem.solid import SolidState


def _polygon(P):
    m = len(P)
    edges = np.column_stack([np.arange(m), (np.arange(m) + 1) % m])
    s = np.arange(m, dtype=float)
    return SolidState.initial(LagrangianMesh(1, s, edges, True, np.asarray(P, float), np.ones(m), edges, 1.0))


def test_unit_square_and_orientation():
    sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert enclosed_area(_polygon(sq)) == 1.0
    assert enclosed_area(_polygon(sq[::-1])) == -1.0


def test_circle_area_convergence():
    r = 0.4
    err = [abs(enclosed_area(SolidState.initial(build_lagrangian_curve((0.5, 0.5), (r, r), m))) - np.pi * r * r)
           for m in (64, 128)]
    assert 3.2 <= err[0] / err[1] <= 4.8


def test_disc_identity_area():
    d = build_lagrangian_disc((0.2, 0.1), (0.3, 0.2), 2)
    assert enclosed_area(SolidState.initial(d)) == pytest.approx(d.measure, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-2, 2), st.floats(-2, 2))
def test_rigid_invariance(theta, tx, ty):
    c = build_lagrangian_curve((0.0, 0.0), (0.5, 0.3), 40)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    Y = c.X0 @ R.T + [tx, ty]
    a0 = enclosed_area(SolidState.initial(c))
    assert enclosed_area(SolidState.initial(c, Y)) == pytest.approx(a0, rel=1e-12)
    assert eccentricity(Y) == pytest.approx(eccentricity(c.X0), abs=1e-12)
    d = build_lagrangian_disc((0.0, 0.0), (0.4, 0.2), 1)
    assert enclosed_area(SolidState.initial(d, d.X0 @ R.T + [tx, ty])) == pytest.approx(d.measure, rel=1e-12)


def test_eccentricity_examples():
    assert eccentricity(build_lagrangian_curve((0.3, 0.3), (0.2, 0.2), 50).X0) < 1e-12
    assert eccentricity(build_lagrangian_curve((0.0, 0.0), (0.5, 0.3), 64).X0) == pytest.approx(0.25, abs=1e-12)


def test_drift_rate():
    t = np.linspace(0, 2, 21)
    assert area_drift_rate(t, np.full_like(t, 3.0)) == pytest.approx(0.0, abs=1e-14)
    assert area_drift_rate(t, 1 - 0.01 * t) == pytest.approx(-0.01, abs=1e-12)
    rng = np.random.default_rng(4)
    a = 2.0 * (1 - 0.03 * t) + 0.001 * rng.standard_normal(len(t))
    X = np.column_stack([t, np.ones_like(t)])
    oracle = np.linalg.lstsq(X, a / a[0], rcond=None)[0][0]
    assert area_drift_rate(t, a) == pytest.approx(oracle, rel=1e-10)
    with pytest.raises(InvalidArgumentError):
        area_drift_rate(t[:9], a[:9])
    with pytest.raises(InvalidArgumentError):
        area_drift_rate(t, a[:-1])


def test_time_series():
    ts = TimeSeries()
    ts.append(time=0.0, area=1.0)
    ts.append(time=0.1, area=0.9, constraint_residual=1e-12)
    assert len(ts) == 2 and ts.keys() == ["time", "area", "constraint_residual"]
    assert np.isnan(ts["constraint_residual"][0]) and ts["area"][1] == 0.9
    assert relative_change([2.0, 1.9, 2.2]) == pytest.approx(0.1)
