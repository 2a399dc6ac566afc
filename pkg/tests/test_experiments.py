import io as _io
import json
import os
from contextlib import redirect_stdout

import numpy as np
import pytest

import ibfem.solid as solid_module
from ibfem.diagnostics import TimeSeries
from ibfem.errors import ConfigurationError
from ibfem.experiments import PRESETS, build_config, load_config, preset, run_experiment, sweep_stability
from ibfem.experiments import io as eio
from ibfem.experiments.cli import main
from ibfem.experiments.config import parse_text
from ibfem.experiments.runner import build_problem
from ibfem.experiments.verify import run_verify

SERIES_HEADER = ("step,time,kinetic_fluid,kinetic_solid,elastic,energy_ratio,area,div_residual,"
                 "constraint_residual,L_n,cfl_lhs,cfl_rhs_scale")


def small(name="thin_energy", **kw):
    base = dict(nx=8, ny=8, n_steps=4, output_figures=False)
    base.update(kw)
    return preset(name).replace(**base)


@pytest.mark.parametrize("overrides", [
    {"scheme": "RK4"}, {"element_pair": "p1_p1"}, {"dt": 0.0}, {"nx": 0}, {"fluid_nu": -1.0},
    {"solid_delta_rho": -0.1}, {"geometry_m": 2}, {"geometry_center": (0.95, 0.5)},
    {"domain": (0.0, -1.0, 0.0, 1.0)}, {"startup": "warm"}, {"force_form": "magic"},
    {"solid_rho_s": 2.0, "solid_delta_rho": 0.3}, {"coupling_quad_points": 0},
])
def test_config_rejection(overrides):
    with pytest.raises(ConfigurationError):
        build_config(preset("thin_energy"), **overrides)


def test_config_text_roundtrip(tmp_path):
    for c in PRESETS.values():
        p = tmp_path / f"{c.name}.txt"
        p.write_text(c.to_text())
        assert load_config(str(p)) == c
    with pytest.raises(ConfigurationError):
        parse_text("solid.kapa = 1")
    with pytest.raises(ConfigurationError):
        parse_text("just words")


def test_config_file_with_overrides(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# comment\nscheme = FEIBM\nsolid.kappa = 2.5\ndomain = 0, 2, 0, 1\n"
                 "geometry.center = 1.0, 0.5\n")
    c = load_config(str(p), preset("thin_energy"), ["dt=0.02"])
    assert (c.scheme, c.solid_kappa, c.domain, c.dt) == ("FEIBM", 2.5, (0.0, 2.0, 0.0, 1.0), 0.02)


def test_csv_header_and_roundtrip(tmp_path):
    assert eio.emit_csv(TimeSeries(), str(tmp_path / "empty.csv"))
    assert (tmp_path / "empty.csv").read_text() == SERIES_HEADER + "\n"
    res = run_experiment(small(scheme="FEIBM"))
    path = str(tmp_path / "s.csv")
    eio.emit_csv(res.series, path)
    text = open(path, newline="").read()
    assert text.splitlines()[0] == SERIES_HEADER and "\r" not in text
    cols = eio.parse_csv(path)
    assert list(cols) == SERIES_HEADER.split(",")
    assert cols["step"] == [r.step for r in res.reports]
    for name, attr in [("energy_ratio", "energy_ratio"), ("area", "area"), ("cfl_rhs_scale", "cfl_rhs"),
                       ("time", "time"), ("L_n", "L_n")]:
        assert cols[name] == [getattr(r, attr) for r in res.reports]
    assert all(v is None for v in cols["constraint_residual"])


def test_determinism(tmp_path):
    a = run_experiment(small(), str(tmp_path / "a"), figures=True)
    b = run_experiment(small(), str(tmp_path / "b"), figures=True)
    for name in ["series.csv", "diagnostics.csv", "meta.json", "config.txt", "snapshot_00000.csv",
                 "energy_ratio.png", "area.png"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    assert meta["status"] == "completed" and meta["steps_completed"] == 4
    assert a.status == b.status == "completed"


def test_snapshot(tmp_path):
    pb, fl, so = build_problem(small("rest"))
    path = str(tmp_path / "snap.csv")
    eio.emit_snapshot(fl, so, path, pb.pair)
    snap = eio.parse_snapshot(path)
    assert snap["fluid"].shape == (pb.pair.n_velocity, 5)
    assert not np.any(snap["fluid"][:, 2:4])
    assert np.array_equal(snap["fluid"][:, :2], pb.pair.velocity.dof_coords)
    assert np.array_equal(snap["solid"], so.X)
    text = open(path).read()
    assert "# fluid\nx,y,u,v,p\n" in text and "# solid\nnode,X,Y\n" in text


def test_rest_preset_all_zero_velocity():
    res = run_experiment(preset("rest").replace(output_figures=False))
    assert res.status == "completed"
    assert all(r.kinetic_fluid == 0.0 for r in res.reports)
    assert np.abs(res.final_fluid.u).max() == 0.0


def test_error_status_reports_step(monkeypatch):
    import ibfem.steppers as steppers
    from ibfem.errors import FactorizationError
    real = steppers.solve_step_matrix
    calls = []

    def failing(A, b, tol=1e-9):
        calls.append(1)
        if len(calls) == 3:
            raise FactorizationError("injected")
        return real(A, b, tol)

    monkeypatch.setattr(steppers, "solve_step_matrix", failing)
    res = run_experiment(small())
    assert res.status == "error" and res.error_step == 3
    assert res.error.startswith("step 3: FactorizationError")
    assert len(res.reports) == 3


ESCAPE = dict(scheme="FEIBM", nx=8, ny=4, dt=1.0, n_steps=20, initial_velocity_U=-5.0, solid_kappa=0.0)


def test_escape_is_an_error():
    # explicit node advection with a huge step throws the fibre out of the box
    res = run_experiment(small("two_circles", **ESCAPE))
    assert res.status == "error" and res.error_step == 2
    assert "StructureEscapedError" in res.error and "outside the domain" in res.error


def test_sweep(tmp_path):
    base = small(n_steps=3)
    with pytest.raises(ConfigurationError):
        sweep_stability(base, [], [0.125], [0.125])
    cells = sweep_stability(base, [0.1, 0.5], [1 / 32], [1 / 8], output_dir=str(tmp_path), figures=True)
    assert len(cells) == 4
    byk = {(c.scheme, c.dt): c for c in cells}
    assert byk[("DLM", 0.5)].stable and byk[("DLM", 0.1)].stable
    assert not byk[("FEIBM", 0.5)].stable and byk[("FEIBM", 0.5)].blew_up_at_step is not None
    assert (tmp_path / "stability.csv").exists() and (tmp_path / "stability.png").exists()
    lines = (tmp_path / "stability.csv").read_text().splitlines()
    assert len(lines) == 5


def _cli(argv):
    buf = _io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


def test_cli_exit_codes(tmp_path):
    code, out = _cli(["presets"])
    assert code == 0 and "thin_energy" in out
    code, out = _cli(["show", "--preset", "rest", "--set", "solid.kappa=2"])
    assert code == 0 and "solid.kappa = 2.0" in out
    assert _cli(["show", "--preset", "rest", "--set", "solid.kappa=-2"])[0] == 2
    assert _cli(["run", str(tmp_path / "missing.txt")])[0] == 2
    out_dir = str(tmp_path / "run")
    code, out = _cli(["run", "--preset", "rest", "--steps", "2", "-o", out_dir, "--no-figures", "-q"])
    assert code == 0 and os.path.exists(os.path.join(out_dir, "series.csv"))
    sets = [f"--set={k.replace('initial_velocity_', 'initial_velocity.').replace('solid_', 'solid.')}={v}"
            for k, v in ESCAPE.items()]
    code, _ = _cli(["run", "--preset", "two_circles", "-q", "--no-figures", "-o", str(tmp_path / "esc")] + sets)
    assert code == 3
    with pytest.raises(SystemExit):
        main(["run", "--scheme", "RK4"])


def test_cli_verify_subset():
    code, out = _cli(["verify", "--only", "fem"])
    assert code == 0 and "# 2/2 passed" in out


def test_mutation_sign_flip_is_caught(monkeypatch):
    original = solid_module.assemble_solid_matrices

    def flipped(mesh, model):
        M, K = original(mesh, model)
        return M, -K

    monkeypatch.setattr(solid_module, "assemble_solid_matrices", flipped)
    buf = _io.StringIO()
    results = run_verify(["solid.gradient_consistency"], stream=buf)
    assert len(results) == 1 and not results[0].passed


@pytest.mark.slow
def test_thin_energy_preset():
    res = run_experiment(preset("thin_energy").replace(output_figures=False))
    assert res.status == "completed" and res.max_energy_ratio <= 1 + 1e-8


@pytest.mark.slow
def test_two_circles_preset():
    res = run_experiment(preset("two_circles").replace(output_figures=False))
    assert res.status == "completed" and len(res.reports) == 101
    assert all(np.isfinite(r.energy_ratio) for r in res.reports)
