"""Cross-module invariant suite behind ``ibfem verify``.

Each check is a small, fast, self-contained comparison against an
independent oracle. Output is a tab-separated table (``check``,
``status``, ``detail``) followed by a summary line.
"""
import sys
import time
from dataclasses import dataclass

import numpy as np

from .. import coupling, diagnostics, fem, fluid, geometry, quadrature, solid, steppers
from ..errors import ConfigurationError, OutOfDomainError

CHECKS = []


def check(name):
    def register(fn):
        CHECKS.append((name, fn))
        return fn
    return register


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.abs(b).max(), 1e-300)
    return float(np.abs(a - b).max() / scale)


# ---------------------------------------------------------------- quadrature
@check("quadrature.monomial_exactness")
def _quad():
    worst = 0.0
    for d in (1, 2, 5, 9):
        rule = quadrature.quadrature_rule("triangle", d)
        x, y = rule.points.T
        for i in range(d + 1):
            for j in range(d + 1 - i):
                from math import factorial
                exact = factorial(i) * factorial(j) / factorial(i + j + 2)
                worst = max(worst, abs(rule.weights @ (x ** i * y ** j) - exact) / exact)
    for d in (1, 3, 7):
        rule = quadrature.quadrature_rule("segment", d)
        t = rule.points[:, 0]
        for k in range(d + 1):
            worst = max(worst, abs(rule.weights @ t ** k - 1.0 / (k + 1)) * (k + 1))
    return worst < 1e-12, f"max relative error {worst:.2e}"


# ------------------------------------------------------------------ geometry
@check("geometry.tiling_area")
def _tiling():
    m = geometry.build_eulerian_mesh((0.0, 2.0, -1.0, 0.5), 5, 3)
    a = m.triangle_areas()
    err = abs(a.sum() - 3.0)
    return err < 1e-12 and a.min() > 0, f"area error {err:.1e}, min area {a.min():.3e}"


@check("geometry.locate_reconstructs_points")
def _locate():
    rng = np.random.default_rng(0)
    m = geometry.build_eulerian_mesh((0.0, 1.0, 0.0, 1.0), 7, 4)
    p = rng.random((500, 2))
    e, b = geometry.locate_points(m, p)
    rec = np.einsum("pi,pij->pj", b, m.vertices[m.triangles[e]])
    err = np.abs(rec - p).max()
    ok = err < 1e-13 and b.min() >= -1e-14 and np.allclose(b.sum(1), 1.0)
    return ok, f"reconstruction error {err:.1e}"


@check("geometry.out_of_domain_raises")
def _ood():
    m = geometry.build_eulerian_mesh((0.0, 1.0, 0.0, 1.0), 2, 2)
    try:
        geometry.locate_points(m, np.array([[1.5, 0.5]]))
    except OutOfDomainError:
        return True, "raised"
    return False, "no error for a point outside"


@check("geometry.disc_mesh_oriented")
def _disc():
    worst = np.inf
    for r in range(3):
        d = geometry.build_lagrangian_disc((0.5, 0.5), (0.3, 0.2), r)
        worst = min(worst, d.measures.min())
    return worst > 0, f"min signed area {worst:.3e}"


# ----------------------------------------------------------------------- fem
@check("fem.partition_of_unity")
def _pou():
    rng = np.random.default_rng(1)
    worst = 0.0
    for fam in ("P1", "P2", "P1isoP2"):
        for _ in range(20):
            r = rng.random(2)
            if r.sum() > 1:
                r = 1 - r
            worst = max(worst, abs(fem.eval_basis(fem.ElementSpace(fam), r).sum() - 1))
    return worst < 1e-14, f"max deviation {worst:.1e}"


@check("fem.unstable_pair_rejected")
def _unstable():
    m = geometry.build_eulerian_mesh((0.0, 1.0, 0.0, 1.0), 2, 2)
    try:
        fem.StokesPair.from_families(m, "P1", "P1")
    except ConfigurationError:
        return True, "P1/P1 rejected"
    return False, "P1/P1 accepted"


def _small_pair(name="taylor_hood", n=6):
    return fem.StokesPair(geometry.build_eulerian_mesh((0.0, 1.0, 0.0, 1.0), n, n), name)


# --------------------------------------------------------------------- fluid
@check("fluid.mass_and_rigid_kernel")
def _mass():
    worst = 0.0
    for name in fem.STABLE_PAIRS:
        pair = _small_pair(name)
        ops = fluid.FluidOperators(pair, fluid.FluidParams(1.0, 0.7))
        n = pair.n_velocity
        c = pair.velocity.dof_coords
        one = np.concatenate([np.ones(n), np.zeros(n)])
        rot = np.concatenate([-c[:, 1], c[:, 0]])
        worst = max(worst, abs(one @ ops.M @ one - 1.0), np.abs(ops.K @ one).max(), np.abs(ops.K @ rot).max())
    return worst < 1e-12, f"max residual {worst:.1e}"


@check("fluid.skew_convection")
def _skew():
    rng = np.random.default_rng(2)
    pair = _small_pair()
    w = rng.standard_normal(2 * pair.n_velocity)
    N = fluid.assemble_convection_skew(pair, w)
    v = rng.standard_normal(2 * pair.n_velocity)
    val = abs(v @ (N @ v)) / (np.linalg.norm(v) ** 2 * max(abs(N).max(), 1e-300))
    asym = abs(N + N.T).max()
    return val < 1e-12 and asym == 0.0, f"v.Nv scaled {val:.1e}, |N+N^T| {asym:.1e}"


@check("fluid.gradient_force_balanced_by_pressure")
def _stokes():
    import scipy.sparse as sp
    pair = _small_pair()
    ops = fluid.FluidOperators(pair, fluid.FluidParams())
    f = pair.interpolate(lambda x, y: (2.0 * x + 0 * y, 0 * x - y))  # grad of x^2 - y^2/2
    A_ff, b_f, free = fluid.apply_velocity_bc(ops.K, ops.M @ f, ops.boundary)
    B = ops.B_free[1:]
    K = sp.bmat([[A_ff, B.T], [B, None]], format="csc")
    z, _ = steppers.solve_step_matrix(K, np.concatenate([b_f, np.zeros(B.shape[0])]))
    umax = np.abs(z[:len(free)]).max()
    return umax < 1e-10, f"max |u| {umax:.1e}"


# --------------------------------------------------------------------- solid
def _random_state(mesh, rng, amp=0.02):
    X = mesh.X0 + amp * rng.standard_normal(mesh.X0.shape)
    return solid.SolidState.initial(mesh, X)


def gradient_error(mesh, rng, samples=5, eps=1e-6):
    """Worst relative error of ``elastic_force`` against central differences of the energy."""
    params = solid.SolidParams.from_densities(2.0, 1.5, 1.0, mesh.codim)
    model = solid.ElasticModel.for_params(params)
    worst = 0.0
    for _ in range(samples):
        st = _random_state(mesh, rng)
        d = rng.standard_normal(st.X.shape)
        e = lambda Y: solid.elastic_energy(solid.SolidState.initial(mesh, Y), model)  # noqa: E731
        fd = (e(st.X + eps * d) - e(st.X - eps * d)) / (2 * eps)
        an = -np.sum(solid.elastic_force(st, model) * d)
        worst = max(worst, abs(fd - an) / max(abs(fd), 1e-12))
    return worst


@check("solid.gradient_consistency")
def _grad():
    rng = np.random.default_rng(3)
    e1 = gradient_error(geometry.build_lagrangian_curve((0.5, 0.5), (0.3, 0.2), 24), rng)
    e0 = gradient_error(geometry.build_lagrangian_disc((0.5, 0.5), (0.3, 0.2), 1), rng)
    return max(e0, e1) < 1e-5, f"codim-1 {e1:.1e}, codim-0 {e0:.1e}"


@check("solid.energy_translation_invariant")
def _transl():
    rng = np.random.default_rng(4)
    mesh = geometry.build_lagrangian_disc((0.5, 0.5), (0.3, 0.2), 1)
    model = solid.ElasticModel("linear", 1.0)
    st = _random_state(mesh, rng)
    sh = solid.SolidState.initial(mesh, st.X + np.array([0.3, -0.1]))
    e0, e1 = solid.elastic_energy(st, model), solid.elastic_energy(sh, model)
    f0, f1 = solid.elastic_force(st, model), solid.elastic_force(sh, model)
    err = max(abs(e0 - e1) / e0, _rel(f1, f0))
    return err < 1e-12 and e0 >= 0, f"relative change {err:.1e}"


@check("solid.jump_equals_volume_form")
def _jump():
    rng = np.random.default_rng(5)
    mesh = geometry.build_lagrangian_disc((0.5, 0.5), (0.3, 0.2), 1)
    model = solid.ElasticModel("linear", 1.3)
    worst = 0.0
    for _ in range(5):
        st = _random_state(mesh, rng, 0.03)
        c = rng.standard_normal((2, 6))

        def v(p):
            x, y = p[:, 0], p[:, 1]
            basis = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], 1)
            return basis @ c.T

        def gv(p):
            x, y = p[:, 0], p[:, 1]
            dx = np.stack([0 * x, 1 + 0 * x, 0 * x, 2 * x, y, 0 * x], 1) @ c.T
            dy = np.stack([0 * x, 0 * x, 1 + 0 * x, 0 * x, x, 2 * y], 1) @ c.T
            return np.stack([dx, dy], axis=2)

        a = solid.pair_volume_form(st, model, gv)
        b = solid.pair_jump_form(st, model, v)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    return worst < 1e-12, f"max relative difference {worst:.1e}"


# ------------------------------------------------------------------ coupling
@check("coupling.constants_and_linears")
def _coupling():
    pair = _small_pair("taylor_hood", 8)
    worst = 0.0
    for mesh in (geometry.build_lagrangian_curve((0.5, 0.5), (0.3, 0.2), 30),
                 geometry.build_lagrangian_disc((0.5, 0.5), (0.3, 0.2), 1, (1.1, 0.9))):
        st = solid.SolidState.initial(mesh)
        Lf = coupling.assemble_L_f(st, pair)
        Ls = coupling.assemble_L_s(mesh)
        u = pair.interpolate(lambda x, y: (3 * x - y + 0.5, 0 * x))[:pair.n_velocity]
        ref = Ls @ (3 * st.X[:, 0] - st.X[:, 1] + 0.5)
        worst = max(worst, _rel(Lf @ u, ref))
    return worst < 1e-12, f"max relative error {worst:.1e}"


@check("coupling.inertial_matrix_spd_part")
def _inertial():
    pair = _small_pair("taylor_hood", 8)
    mesh = geometry.build_lagrangian_curve((0.5, 0.5), (0.3, 0.2), 30)
    st = solid.SolidState.initial(mesh)
    M_ib, _ = coupling.assemble_inertial_coupling(st, pair, 0.3, np.zeros(2 * pair.n_velocity), 0.1)
    asym = abs(M_ib - M_ib.T).max()
    rng = np.random.default_rng(6)
    v = rng.standard_normal(M_ib.shape[0])
    return asym < 1e-14 and v @ (M_ib @ v) >= 0, f"asymmetry {asym:.1e}"


# ------------------------------------------------------------------ steppers
def _problem(scheme, dt=0.1, kappa=1.0, n=8, codim=1):
    pair = _small_pair("taylor_hood", n)
    if codim == 1:
        mesh = geometry.build_lagrangian_curve((0.5, 0.5), (0.25, 0.15), 32)
    else:
        mesh = geometry.build_lagrangian_disc((0.5, 0.5), (0.2, 0.2), 0, (1.3, 1 / 1.3))
    params = solid.SolidParams.from_densities(kappa, 1.3, 1.0, codim)
    return steppers.Problem(pair, fluid.FluidParams(1.0, 0.5), mesh, params,
                            steppers.SchemeConfig(scheme, dt, 5))


@check("steppers.rest_stays_at_rest")
def _rest():
    worst = 0.0
    for scheme in steppers.SCHEMES:
        pr = _problem(scheme, kappa=0.0)
        res = steppers.integrate(pr, fluid.FluidState.rest(pr.pair), solid.SolidState.initial(pr.mesh))
        worst = max(worst, np.abs(res.fluid.u).max(), np.abs(res.solid.X - pr.mesh.X0).max())
    return worst == 0.0, f"max deviation {worst:.1e}"


@check("steppers.dlm_energy_inequality")
def _dlm_energy():
    worst = -np.inf
    for codim in (1, 0):
        pr = _problem("DLM", codim=codim)
        res = steppers.integrate(pr, fluid.FluidState.rest(pr.pair), solid.SolidState.initial(pr.mesh))
        worst = max(worst, max(r.energy_slack / r.energy_scale for r in res.reports[1:]))
    return worst <= 1e-8, f"max slack/scale {worst:.2e}"


@check("steppers.per_step_invariants")
def _invariants():
    worst = {}
    for scheme in steppers.SCHEMES:
        pr = _problem(scheme)
        res = steppers.integrate(pr, fluid.FluidState.rest(pr.pair), solid.SolidState.initial(pr.mesh))
        for r in res.reports[1:]:
            for key in ("div_residual", "skew_residual", "pressure_mean", "solve_residual"):
                worst[key] = max(worst.get(key, 0.0), abs(getattr(r, key)))
            if r.constraint_residual is not None:
                worst["constraint"] = max(worst.get("constraint", 0.0), r.constraint_residual)
    ok = (worst["div_residual"] < 1e-9 and worst["skew_residual"] < 1e-12
          and worst["pressure_mean"] < 1e-10 and worst["constraint"] < 1e-9)
    return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


@check("steppers.cfl_rows")
def _cfl():
    a = steppers.cfl_check(0.2, 0.5, 0.25, 0.2, (2, 1))
    b = steppers.cfl_check(0.1, 0.5, 0.25, 0.2, (2, 2))
    c = steppers.cfl_check(0.0, 1e9, 0.25, 0.2, (2, 1))
    ok = (a.rhs_scale == 0.25 * 0.2 and a.lhs == 0.1 and not a.satisfied_at_C1
          and b.rhs_scale == 0.25 and b.satisfied_at_C1 and c.satisfied_at_C1)
    return ok, "table rows"


# --------------------------------------------------------------- diagnostics
@check("diagnostics.area_and_eccentricity")
def _diag():
    sq = geometry.LagrangianMesh(
        codim=1, vertices=np.arange(4.0), elements=np.array([[0, 1], [1, 2], [2, 3], [3, 0]]),
        closed=True, X0=np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]]), measures=np.ones(4),
        edges=np.array([[0, 1], [1, 2], [2, 3], [3, 0]]), h_s=1.0)
    a = diagnostics.enclosed_area(solid.SolidState.initial(sq))
    circle = geometry.build_lagrangian_curve((0.2, 0.1), (0.4, 0.4), 50).X0
    ell = geometry.build_lagrangian_curve((0.0, 0.0), (0.5, 0.3), 64).X0
    e0, e1 = diagnostics.eccentricity(circle), diagnostics.eccentricity(ell)
    ok = abs(a - 1) < 1e-15 and e0 < 1e-12 and abs(e1 - 0.25) < 1e-12
    return ok, f"square {a:.15g}, circle {e0:.1e}, ellipse {e1:.15g}"


# --------------------------------------------------------------- experiments
@check("experiments.csv_roundtrip")
def _csv():
    import os
    import tempfile
    from . import io
    rng = np.random.default_rng(7)
    cols = {c: list(rng.standard_normal(5)) for c in io.SERIES_COLUMNS}
    cols["step"] = list(range(5))
    cols["cfl_rhs"] = cols.pop("cfl_rhs_scale")
    cols["constraint_residual"] = [None] * 5
    with tempfile.TemporaryDirectory() as d:
        p = io.emit_csv(cols, os.path.join(d, "s.csv"))
        back = io.parse_csv(p)
    ok = back["time"] == cols["time"] and back["cfl_rhs_scale"] == cols["cfl_rhs"] \
        and back["constraint_residual"] == [None] * 5
    return ok, "bit-exact" if ok else "mismatch"


@check("experiments.config_rejection")
def _config():
    from .config import build_config
    bad = [dict(solid_delta_rho=-0.1), dict(geometry_m=2, geometry_h_s=None), dict(dt=0.0),
           dict(scheme="RK4"), dict(element_pair="p1_p1"), dict(geometry_center=(5.0, 5.0))]
    missed = []
    for kw in bad:
        try:
            build_config(**kw)
            missed.append(kw)
        except ConfigurationError:
            pass
    return not missed, "all rejected" if not missed else f"accepted {missed}"


def run_verify(names=None, stream=sys.stdout):
    """Run the registered checks (optionally a subset by prefix); returns the results."""
    results = []
    for name, fn in CHECKS:
        if names and not any(name.startswith(n) for n in names):
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        r = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        results.append(r)
        if stream is not None:
            stream.write(f"{r.name}\t{'PASS' if r.passed else 'FAIL'}\t{r.detail}\n")
            stream.flush()
    if stream is not None:
        n_fail = sum(not r.passed for r in results)
        stream.write(f"# {len(results) - n_fail}/{len(results)} passed\n")
    return results
