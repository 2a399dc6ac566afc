"""Build a problem from a config, run it, and sweep stability grids."""
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..coupling import CouplingConfig
from ..diagnostics import MIN_DRIFT_SAMPLES, TimeSeries, area_drift_rate
from ..errors import ConfigurationError, FactorizationError, OutOfDomainError
from ..fem import StokesPair
from ..fluid import FluidParams, FluidState, apply_velocity_bc
from ..geometry import (
    build_eulerian_mesh,
    build_lagrangian_curve,
    build_lagrangian_disc,
    merge_curves,
)
from ..solid import SolidParams, SolidState
from ..steppers import SCHEMES, Problem, SchemeConfig, integrate, solve_step_matrix
from .config import validate

MAX_DISC_REFINEMENT = 5


def ellipse_perimeter(axes, samples=1 << 14):
    a, b = axes
    t = np.linspace(0.0, 2.0 * np.pi, samples + 1)
    p = np.column_stack([a * np.cos(t), b * np.sin(t)])
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def curve_vertex_count(config, axes):
    if config.geometry_m is not None:
        return int(config.geometry_m)
    return max(3, int(round(ellipse_perimeter(axes) / config.geometry_h_s)))


def disc_refinement_for(center, axes, h_s):
    """Refinement level whose largest reference edge is closest to ``h_s``."""
    best, best_err = 0, math.inf
    for r in range(MAX_DISC_REFINEMENT + 1):
        err = abs(math.log(build_lagrangian_disc(center, axes, r).h_s / h_s))
        if err < best_err:
            best, best_err = r, err
    return best


def build_solid_mesh(config):
    kind = config.geometry_kind
    if kind == "ellipse_curve":
        m = curve_vertex_count(config, config.geometry_axes)
        return build_lagrangian_curve(config.geometry_center, config.geometry_axes, m)
    if kind == "disc":
        return build_lagrangian_disc(config.geometry_center, config.geometry_axes,
                                     config.geometry_refinement, config.geometry_stretch)
    r = config.geometry_radius
    m = curve_vertex_count(config, (r, r))
    return merge_curves([build_lagrangian_curve(c, (r, r), m) for c in config.geometry_centers])


def solid_params(config):
    codim = config.codim
    t_s = config.solid_t_s if codim == 1 else 1.0
    if config.solid_delta_rho is not None:
        drho = float(config.solid_delta_rho)
        rho_s = config.solid_rho_s
        if rho_s is None:
            rho_s = config.fluid_rho_f + drho / t_s
        return SolidParams(float(config.solid_kappa), float(rho_s), float(t_s), drho, codim)
    return SolidParams.from_densities(config.solid_kappa, config.solid_rho_s, config.fluid_rho_f, codim, t_s)


def project_divergence_free(problem, u_star):
    """L2 projection of ``u_star`` onto discretely divergence-free velocities."""
    fo = problem.fluid
    A_ff, b_f, free = apply_velocity_bc(fo.M, fo.M @ u_star, fo.boundary)
    B = fo.B_free[1:]
    K = sp.bmat([[A_ff, B.T], [B, None]], format="csc")
    z, _ = solve_step_matrix(K, np.concatenate([b_f, np.zeros(B.shape[0])]))
    u = np.zeros_like(u_star)
    u[free] = z[:len(free)]
    return u


def opposing_shear(problem, config):
    """``u_x = U tanh((y - y_mid)/w) * bump``, ``u_y = 0``, then projected."""
    x0, x1, y0, y1 = config.domain
    U, w = config.initial_velocity_U, config.initial_velocity_transition_width
    ymid = 0.5 * (y0 + y1)

    def field(x, y):
        xi, eta = (x - x0) / (x1 - x0), (y - y0) / (y1 - y0)
        bump = 16.0 * xi * (1 - xi) * eta * (1 - eta)
        return U * np.tanh((y - ymid) / w) * bump, 0.0 * x

    return project_divergence_free(problem, problem.pair.interpolate(field))


def build_problem(config):
    """``(problem, fluid0, solid0)`` for a validated config."""
    config = validate(config)
    mesh = build_eulerian_mesh(config.domain, config.nx, config.ny)
    pair = StokesPair(mesh, config.element_pair)
    solid_mesh = build_solid_mesh(config)
    scheme = SchemeConfig(config.scheme, config.dt, config.n_steps,
                          config.linear_solver_tolerance, config.force_form)
    coupling = CouplingConfig(quad_points_per_solid_element=config.coupling_quad_points)
    problem = Problem(pair, FluidParams(config.fluid_rho_f, config.fluid_nu), solid_mesh,
                      solid_params(config), scheme, coupling)
    if not np.all(mesh.contains(solid_mesh.X0)):
        raise ConfigurationError("initial structure is not inside the fluid domain")
    fluid = FluidState.rest(pair)
    if config.initial_velocity_kind == "opposing_shear":
        fluid = FluidState(opposing_shear(problem, config), fluid.p, 0.0)
    solid = SolidState.initial(solid_mesh, startup=config.startup)
    return problem, fluid, solid


@dataclass
class ExperimentResult:
    config: object
    reports: list
    series: TimeSeries
    status: str
    blew_up_at: int = None
    error: str = None
    error_step: int = None
    snapshots: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    final_fluid: object = None
    final_solid: object = None
    problem: object = None

    @property
    def max_energy_ratio(self):
        return max(r.energy_ratio for r in self.reports)

    def drift_rate(self):
        if len(self.reports) < MIN_DRIFT_SAMPLES:
            return None
        return area_drift_rate([r.time for r in self.reports], [r.area for r in self.reports])

    def meta(self):
        return {
            "name": self.config.name,
            "scheme": self.config.scheme,
            "element_pair": self.config.element_pair,
            "status": self.status,
            "steps_completed": self.reports[-1].step if self.reports else 0,
            "blew_up_at_step": self.blew_up_at,
            "error": self.error,
            "error_step": self.error_step,
            "max_energy_ratio": self.max_energy_ratio if self.reports else None,
            "area_drift_rate": self.drift_rate(),
            "snapshots": [os.path.basename(p) for p in self.snapshots],
        }


def run_experiment(config, output_dir=None, figures=None, progress=None):
    """Run one configuration.

    With ``output_dir`` the series CSV, a full diagnostics CSV, snapshots
    every ``output.snapshot_every`` steps, ``meta.json`` and (optionally)
    PNG figures are written there. Blow-up stops the run early; solver and
    domain errors end it with ``status == "error"`` and the failing step.
    """
    from . import io

    problem, fluid, solid = build_problem(config)
    every = config.output_snapshot_every
    snapshots = []
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)

    def on_step(report, fl, so):
        if output_dir is not None and every and report.step % every == 0:
            path = os.path.join(output_dir, f"snapshot_{report.step:05d}.csv")
            io.emit_snapshot(fl, so, path, problem.pair)
            snapshots.append(path)
        if progress is not None:
            progress(report)

    reports = []

    def track(report, fl, so):
        reports.append(report)
        on_step(report, fl, so)
        track.state = (fl, so)

    track.state = (fluid, solid)
    status, blew, err, err_step = "completed", None, None, None
    try:
        res = integrate(problem, fluid, solid, on_step=track)
        status, blew = res.status, res.blew_up_at
    except (OutOfDomainError, FactorizationError) as exc:
        status = "error"
        err_step = reports[-1].step + 1 if reports else 0
        err = f"step {err_step}: {type(exc).__name__}: {exc}"
    result = ExperimentResult(
        config, reports, TimeSeries.from_reports(reports), status, blew, err, err_step,
        snapshots, final_fluid=track.state[0], final_solid=track.state[1], problem=problem,
    )
    if output_dir is not None:
        result.files["series"] = io.emit_csv(result.series, os.path.join(output_dir, "series.csv"))
        result.files["diagnostics"] = io.emit_diagnostics(result.series, os.path.join(output_dir, "diagnostics.csv"))
        result.files["meta"] = io.emit_meta(result, os.path.join(output_dir, "meta.json"))
        with open(os.path.join(output_dir, "config.txt"), "w", encoding="utf-8") as fh:
            fh.write(config.to_text())
        if config.output_figures if figures is None else figures:
            from . import plotting
            result.files.update(plotting.run_figures(result, output_dir))
    return result


@dataclass
class SweepCell:
    scheme: str
    dt: float
    h_s: float
    h_x: float
    nx: int
    ny: int
    solid_resolution: int
    status: str
    stable: bool
    blew_up_at_step: int
    max_energy_ratio: float
    max_cfl_ratio: float
    max_energy_slack: float
    error: str = None
    times: list = None
    energy_ratios: list = None
    result: object = None


def cell_config(base, scheme, dt, h_s, h_x):
    x0, x1, y0, y1 = base.domain
    nx = max(1, int(round((x1 - x0) / h_x)))
    ny = max(1, int(round((y1 - y0) / h_x)))
    changes = dict(scheme=scheme, dt=float(dt), nx=nx, ny=ny)
    if base.geometry_kind == "disc":
        changes["geometry_refinement"] = disc_refinement_for(base.geometry_center, base.geometry_axes, h_s)
    else:
        changes["geometry_m"] = None
        changes["geometry_h_s"] = float(h_s)
    return base.replace(**changes)


def sweep_stability(base, dts, h_s_values, h_x_values, schemes=SCHEMES, output_dir=None,
                    figures=None, keep_results=False, progress=None):
    """Run every (scheme, dt, h_s, h_x) combination; errors are recorded per cell."""
    dts, h_s_values, h_x_values = list(dts), list(h_s_values), list(h_x_values)
    if not (dts and h_s_values and h_x_values and schemes):
        raise ConfigurationError("stability sweep needs nonempty dt, h_s and h_x lists")
    cells = []
    for scheme, dt, h_s, h_x in itertools.product(schemes, dts, h_s_values, h_x_values):
        cfg = cell_config(base, scheme, dt, h_s, h_x)
        cell_dir = None
        if output_dir is not None:
            cell_dir = os.path.join(output_dir, f"{scheme}_dt{dt:g}_hs{h_s:g}_hx{h_x:g}")
        res = run_experiment(cfg, cell_dir, figures=False)
        reps = res.reports
        slacks = [r.energy_slack / r.energy_scale for r in reps[1:] if r.energy_scale]
        cell = SweepCell(
            scheme=scheme, dt=float(dt), h_s=float(h_s), h_x=float(h_x), nx=cfg.nx, ny=cfg.ny,
            solid_resolution=res.problem.mesh.M if cfg.codim == 1 else cfg.geometry_refinement,
            status=res.status, stable=res.status == "completed", blew_up_at_step=res.blew_up_at,
            max_energy_ratio=res.max_energy_ratio,
            max_cfl_ratio=max(r.cfl_lhs / r.cfl_rhs for r in reps),
            max_energy_slack=max(slacks) if slacks else 0.0,
            error=res.error, times=[r.time for r in reps], energy_ratios=[r.energy_ratio for r in reps],
            result=res if keep_results else None,
        )
        cells.append(cell)
        if progress is not None:
            progress(cell)
    if output_dir is not None:
        from . import io
        io.emit_stability_csv(cells, os.path.join(output_dir, "stability.csv"))
        if base.output_figures if figures is None else figures:
            from . import plotting
            plotting.stability_figure(cells, os.path.join(output_dir, "stability.png"))
    return cells
