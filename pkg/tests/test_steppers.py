import numpy as np
import pytest
import scipy.sparse as sp

from ibfem.errors import ConfigurationError, FactorizationError, UnsupportedError
from ibfem.experiments import preset
from ibfem.experiments.runner import build_problem
from ibfem.coupling import assemble_L_s, SolidSampling
from ibfem.steppers import (
    SchemeConfig, StepReport, cfl_check, dlm_step, energy_report, feibm_step, integrate,
    is_blown_up, solve_step_matrix,
)


def _setup(name="thin_energy", **kw):
    base = dict(nx=8, ny=8, n_steps=5)
    base.update(kw)
    return build_problem(preset(name).replace(**base))


def test_scheme_config_validation():
    with pytest.raises(ConfigurationError):
        SchemeConfig("RK4", 0.1)
    with pytest.raises(ConfigurationError):
        SchemeConfig("DLM", 0.0)
    with pytest.raises(ConfigurationError):
        SchemeConfig("DLM", 0.1, n_steps=0)


def test_cfl_check():
    v = cfl_check(0.2, 0.1, 1 / 32, 1 / 8, (2, 1))
    assert v.lhs == pytest.approx(0.02) and v.rhs_scale == pytest.approx(1 / 256)
    assert not v.satisfied_at_C1 and v.margin() == pytest.approx(0.02 * 256)
    assert cfl_check(0.01, 0.1, 1 / 8, 0.1, (2, 2)).satisfied_at_C1
    with pytest.raises(UnsupportedError):
        cfl_check(1.0, 0.1, 0.1, 0.1, (3, 2))


def test_solve_step_matrix_dense_oracle(rng):
    A = sp.random(40, 40, density=0.2, random_state=1) + 5 * sp.eye(40)
    b = rng.standard_normal(40)
    z, res = solve_step_matrix(A, b)
    assert np.allclose(z, np.linalg.solve(A.toarray(), b), atol=1e-12)
    assert res < 1e-12
    singular = sp.csc_matrix(np.diag([1.0, 0.0, 2.0]))
    with pytest.raises(FactorizationError):
        solve_step_matrix(singular, np.ones(3))


@pytest.mark.parametrize("scheme", ["DLM", "FEIBM"])
def test_rest_stays_at_rest(scheme):
    pb, f, s = _setup("rest", scheme=scheme)
    r = integrate(pb, f, s)
    assert r.status == "completed" and len(r.reports) == pb.scheme.n_steps + 1
    assert np.abs(r.fluid.u).max() == 0.0
    assert np.array_equal(r.solid.X, s.X)


@pytest.mark.parametrize("kind", ["thin_energy", "thick_energy"])
def test_dlm_energy_inequality(kind):
    pb, f, s = _setup(kind, scheme="DLM", n_steps=8)
    r = integrate(pb, f, s)
    assert r.status == "completed"
    for prev, rep in zip(r.reports, r.reports[1:]):
        assert rep.energy_slack <= 1e-8 * rep.energy_scale
        assert rep.total <= prev.total * (1 + 1e-12)
        assert rep.constraint_residual <= 1e-9 * max(1.0, np.linalg.norm(r.fluid.u))
        assert rep.solve_residual <= 1e-9 and rep.skew_residual <= 1e-12
        assert abs(rep.pressure_mean) <= 1e-10
    assert r.max_energy_ratio <= 1 + 1e-8


def test_dlm_constraint_and_kinematics():
    pb, f, s = _setup("thin_energy", scheme="DLM")
    f1, s1, lam, rep = dlm_step(pb, f, s, np.zeros((s.mesh.M, 2)), energy_report(pb, f, s, 0))
    # L_s (X^{n+1} - X^n) / dt = L_f(X^n) u^{n+1}
    Lf = SolidSampling(pb.pair, s.mesh, s.X).L_f()
    n = pb.pair.n_velocity
    lhs = assemble_L_s(s.mesh) @ (s1.X - s.X) / pb.dt
    rhs = np.column_stack([Lf @ f1.u[:n], Lf @ f1.u[n:]])
    assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(rhs).max())
    assert np.array_equal(s1.X_prev, s.X) and lam.shape == (s.mesh.M, 2)
    assert np.linalg.norm(pb.fluid.B @ f1.u) <= 1e-9 * max(1.0, np.linalg.norm(f1.u))


def test_feibm_kinematics():
    pb, f, s = _setup("thin_energy", scheme="FEIBM", dt=0.05)
    f1, s1, rep = feibm_step(pb, f, s, energy_report(pb, f, s, 0))
    E = pb.pair.evaluation(s.X)
    n = pb.pair.n_velocity
    vel = np.column_stack([E @ f1.u[:n], E @ f1.u[n:]])
    assert np.allclose(s1.X, s.X + pb.dt * vel, atol=1e-15)
    assert rep.step == 1 and rep.time == pytest.approx(0.05)
    assert np.linalg.norm(pb.fluid.B @ f1.u) <= 1e-9 * max(1.0, np.linalg.norm(f1.u))


def test_energy_report_terms():
    pb, f, s = _setup("thin_energy")
    rng = np.random.default_rng(0)
    u = rng.standard_normal(pb.fluid.n_u)
    u[pb.fluid.boundary] = 0
    f.u = u
    s2 = s.advanced(s.X + 0.001)
    rep = energy_report(pb, f, s2, 3, reference_total=2.0)
    assert rep.kinetic_fluid == pytest.approx(0.5 * pb.fluid_params.rho_f * u @ pb.fluid.M @ u)
    V = (s2.X - s.X) / pb.dt
    assert rep.kinetic_solid == pytest.approx(0.5 * pb.solid_params.delta_rho * np.sum(V * (pb.solid.M_s @ V)))
    assert rep.elastic == pytest.approx(0.5 * np.sum(s2.X * (pb.solid.K_s @ s2.X)))
    assert rep.energy_ratio == pytest.approx(rep.total / 2.0)
    assert rep.cfl_rhs == pytest.approx(pb.h_x * pb.h_s) and rep.C_e_n >= 1
    assert set(rep.as_dict()) >= {"step", "energy_ratio", "area"}


def test_blowup_detection():
    ok = dict(step=1, time=0.1, kinetic_fluid=1.0, kinetic_solid=0.0, elastic=1.0, viscous_dissipation=0.0,
              div_residual=0.0, L_n=0.1, C_e_n=1, cfl_lhs=0.0, cfl_rhs=1.0, area=0.1)
    assert not is_blown_up(StepReport(energy_ratio=1.0, **ok))
    assert is_blown_up(StepReport(energy_ratio=11.0, **ok))
    bad = dict(ok, kinetic_fluid=np.nan)
    assert is_blown_up(StepReport(energy_ratio=1.0, **bad))


def test_feibm_blows_up_where_dlm_does_not():
    cfg = dict(nx=8, ny=8, geometry_h_s=1 / 32, dt=0.5, n_steps=10)
    pb, f, s = _setup("thin_energy", scheme="FEIBM", **cfg)
    r = integrate(pb, f, s)
    assert r.status == "unstable" and r.blew_up_at is not None
    assert r.reports[-1].energy_ratio > 10
    pb, f, s = _setup("thin_energy", scheme="DLM", **cfg)
    r = integrate(pb, f, s)
    assert r.status == "completed" and r.max_energy_ratio <= 1 + 1e-8


def test_on_step_sees_every_state():
    pb, f, s = _setup("thin_energy", n_steps=3)
    seen = []
    integrate(pb, f, s, on_step=lambda rep, fl, so: seen.append((rep.step, fl.t)))
    assert [k for k, _ in seen] == [0, 1, 2, 3]
    assert seen[-1][1] == pytest.approx(3 * pb.dt)
