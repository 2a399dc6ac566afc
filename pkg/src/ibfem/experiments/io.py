"""CSV, snapshot and metadata writers (and the matching parsers).

Numbers use ``%.17g`` so every float round-trips bit-exactly; missing
values are empty fields; lines end with ``\\n`` regardless of platform.
"""
import json

import numpy as np

from ..fluid import pressure_at_velocity_nodes

SERIES_COLUMNS = (
    "step", "time", "kinetic_fluid", "kinetic_solid", "elastic", "energy_ratio", "area",
    "div_residual", "constraint_residual", "L_n", "cfl_lhs", "cfl_rhs_scale",
)
# series column -> StepReport field
_SOURCE = {"cfl_rhs_scale": "cfl_rhs"}
DIAGNOSTIC_COLUMNS = (
    "step", "time", "kinetic_fluid", "kinetic_solid", "elastic", "viscous_dissipation",
    "energy_ratio", "area", "div_residual", "constraint_residual", "pressure_mean",
    "solve_residual", "skew_residual", "energy_slack", "energy_scale", "L_n", "C_e_n",
    "cfl_lhs", "cfl_rhs_scale",
)
_INT_COLUMNS = {"step", "C_e_n", "node"}


def fmt(v):
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def _rows(series, columns):
    cols = series.columns if hasattr(series, "columns") else series
    n = len(next(iter(cols.values()))) if cols else 0
    for i in range(n):
        yield [cols.get(_SOURCE.get(c, c), cols.get(c, [None] * n))[i] for c in columns]


def _write_table(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def emit_csv(series, path):
    """Per-step series with the fixed header; ``series`` is a TimeSeries or column dict."""
    return _write_table(path, SERIES_COLUMNS, _rows(series, SERIES_COLUMNS))


def emit_diagnostics(series, path):
    return _write_table(path, DIAGNOSTIC_COLUMNS, _rows(series, DIAGNOSTIC_COLUMNS))


def _parse_field(name, text):
    if text == "":
        return None
    return int(text) if name in _INT_COLUMNS else float(text)


def parse_csv(path):
    """Read a table written by :func:`emit_csv` into ``{column: list}``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    out = {h: [] for h in header}
    for line in lines[1:]:
        if not line:
            continue
        for h, t in zip(header, line.split(",")):
            out[h].append(_parse_field(h, t))
    return out


def emit_snapshot(fluid, solid, path, pair):
    """Two sections: ``# fluid`` (x,y,u,v,p at velocity nodes) and ``# solid`` (node,X,Y)."""
    c = pair.velocity.dof_coords
    n = pair.n_velocity
    p = pressure_at_velocity_nodes(pair, fluid.p)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# fluid\nx,y,u,v,p\n")
        for i in range(n):
            fh.write(",".join(fmt(v) for v in (c[i, 0], c[i, 1], fluid.u[i], fluid.u[n + i], p[i])) + "\n")
        fh.write("# solid\nnode,X,Y\n")
        for k, (x, y) in enumerate(solid.X):
            fh.write(f"{k},{fmt(x)},{fmt(y)}\n")
    return path


def parse_snapshot(path):
    """``{"fluid": (n, 5) array, "solid": (M, 2) array}``."""
    fluid, solid, section = [], [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh.read().split("\n"):
            if line.startswith("# "):
                section = line[2:]
                continue
            if not line or line[0].isalpha():
                continue
            vals = line.split(",")
            if section == "fluid":
                fluid.append([float(v) for v in vals])
            else:
                solid.append([float(v) for v in vals[1:]])
    return {"fluid": np.array(fluid).reshape(-1, 5), "solid": np.array(solid).reshape(-1, 2)}


def emit_meta(result, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.meta(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


STABILITY_COLUMNS = (
    "scheme", "dt", "h_s", "h_x", "nx", "ny", "solid_resolution", "status", "stable",
    "blew_up_at_step", "max_energy_ratio", "max_cfl_ratio", "max_energy_slack", "error",
)


def emit_stability_csv(cells, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(STABILITY_COLUMNS) + "\n")
        for c in cells:
            vals = []
            for col in STABILITY_COLUMNS:
                v = getattr(c, col)
                if isinstance(v, bool):
                    vals.append("true" if v else "false")
                elif isinstance(v, str):
                    vals.append('"' + v.replace('"', "'") + '"' if "," in v else v)
                else:
                    vals.append(fmt(v))
            fh.write(",".join(vals) + "\n")
    return path
