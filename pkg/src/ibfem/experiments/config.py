"""Flat ``key = value`` experiment configuration.

One setting per line, dotted keys, ``#`` starts a comment::

    scheme = DLM
    solid.kappa = 5.0
    geometry.axes = 0.25, 0.15
    geometry.centers = 1.4, 0.62; 0.6, 0.38

Values are parsed as int, float, comma-separated float tuples (``;``
separates tuples of tuples), ``none``/``true``/``false``, or bare strings.
Validation happens in :func:`validate` before any solver state exists.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, fields

from ..errors import ConfigurationError
from ..fem import STABLE_PAIRS
from ..solid import STARTUPS
from ..steppers import SCHEMES

GEOMETRIES = ("ellipse_curve", "disc", "two_circles")
INITIAL_VELOCITIES = ("rest", "opposing_shear")
FORCE_FORMS = ("auto", "nodal", "volume", "jump")
SHIPPED_PAIRS = ("taylor_hood", "p1isop2_p0")


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "DLM"
    element_pair: str = "taylor_hood"
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    nx: int = 32
    ny: int = 32
    dt: float = 0.1
    n_steps: int = 100
    startup: str = "zero_solid_velocity"
    force_form: str = "auto"
    linear_solver_tolerance: float = 1e-9
    seed: int = None
    fluid_rho_f: float = 1.0
    fluid_nu: float = 1.0
    solid_kappa: float = 5.0
    solid_delta_rho: float = 0.3
    solid_rho_s: float = None
    solid_t_s: float = 1.0
    geometry_kind: str = "ellipse_curve"
    geometry_center: tuple = (0.5, 0.5)
    geometry_axes: tuple = (0.25, 0.15)
    geometry_m: int = None
    geometry_h_s: float = 0.125
    geometry_refinement: int = 0
    geometry_stretch: tuple = (1.0, 1.0)
    geometry_centers: tuple = ((1.4, 0.62), (0.6, 0.38))
    geometry_radius: float = 0.15
    initial_velocity_kind: str = "rest"
    initial_velocity_U: float = -1.0
    initial_velocity_transition_width: float = 0.05
    coupling_quad_points: int = None
    output_directory: str = "ibfem_out"
    output_snapshot_every: int = 10
    output_figures: bool = True
    name: str = "custom"

    @property
    def codim(self):
        return 0 if self.geometry_kind == "disc" else 1

    def replace(self, **changes):
        return validate(dataclasses.replace(self, **changes))

    def to_text(self):
        lines = []
        for f in fields(self):
            lines.append(f"{field_to_key(f.name)} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
_PREFIXES = ("fluid", "solid", "geometry", "initial_velocity", "coupling", "output")


def key_to_field(key):
    key = key.strip()
    for p in _PREFIXES:
        if key.startswith(p + "."):
            return p + "_" + key[len(p) + 1:]
    return key


def field_to_key(name):
    for p in sorted(_PREFIXES, key=len, reverse=True):
        if name.startswith(p + "_"):
            return p + "." + name[len(p) + 1:]
    return name


_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def parse_value(text):
    t = text.strip()
    low = t.lower()
    if low in ("none", "null", ""):
        return None
    if low in ("true", "false"):
        return low == "true"
    if ";" in t:
        return tuple(parse_value(part) for part in t.split(";"))
    if "," in t:
        return tuple(float(x) for x in t.split(",") if x.strip())
    if re.fullmatch(r"[+-]?\d+", t):
        return int(t)
    if _NUM.match(t):
        return float(t)
    return t


def format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(format_value(x) for x in v)
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_text(text):
    """Parse config text into a ``{field_name: value}`` dict of overrides."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        name = key_to_field(key)
        if name not in _FIELD_NAMES:
            raise ConfigurationError(f"line {lineno}: unknown key {key.strip()!r}")
        try:
            out[name] = parse_value(value)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value {value.strip()!r}") from exc
    return out


def parse_overrides(pairs):
    """``["solid.kappa=2", ...]`` to a field dict."""
    return parse_text("\n".join(pairs))


def _coerce(name, value):
    default = getattr(ExperimentConfig, name, None)
    f = next(f for f in fields(ExperimentConfig) if f.name == name)
    kind = f.type
    if value is None:
        return None
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            return bool(value)
        if kind == "tuple":
            if not isinstance(value, tuple):
                return (float(value),)
            if name == "geometry_centers" and value and not isinstance(value[0], tuple):
                return (value,)
            return tuple(v for v in value if v is not None)
        return value if default is None else type(default)(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{field_to_key(name)}: cannot interpret {value!r} as {kind}") from exc


def build_config(base=None, **overrides):
    base = ExperimentConfig() if base is None else base
    clean = {k: _coerce(k, v) for k, v in overrides.items()}
    return validate(dataclasses.replace(base, **clean))


def load_config(path, base=None, overrides=()):
    with open(path, encoding="utf-8") as fh:
        values = parse_text(fh.read())
    values.update(parse_overrides(overrides))
    return build_config(base, **values)


def _pair(v, name):
    if not (isinstance(v, tuple) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise ConfigurationError(f"{name} must be two numbers, got {v!r}")


def _positive(v, name, allow_zero=False):
    ok = v is not None and math.isfinite(v) and (v >= 0 if allow_zero else v > 0)
    if not ok:
        raise ConfigurationError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}, got {v!r}")


def _inside(domain, points, name):
    x0, x1, y0, y1 = domain
    for x, y in points:
        if not (x0 < x < x1 and y0 < y < y1):
            raise ConfigurationError(f"{name} leaves the fluid domain {domain}")


def validate(c):
    """Check every constraint of a config; returns it unchanged or raises ConfigurationError."""
    if c.scheme not in SCHEMES:
        raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {c.scheme!r}")
    if c.element_pair not in STABLE_PAIRS:
        raise ConfigurationError(f"element_pair must be one of {SHIPPED_PAIRS}, got {c.element_pair!r}")
    if c.geometry_kind not in GEOMETRIES:
        raise ConfigurationError(f"geometry.kind must be one of {GEOMETRIES}, got {c.geometry_kind!r}")
    if c.initial_velocity_kind not in INITIAL_VELOCITIES:
        raise ConfigurationError(f"initial_velocity.kind must be one of {INITIAL_VELOCITIES}")
    if c.startup not in STARTUPS:
        raise ConfigurationError(f"startup must be one of {STARTUPS}, got {c.startup!r}")
    if c.force_form not in FORCE_FORMS:
        raise ConfigurationError(f"force_form must be one of {FORCE_FORMS}, got {c.force_form!r}")
    if not (isinstance(c.domain, tuple) and len(c.domain) == 4):
        raise ConfigurationError("domain must be x0, x1, y0, y1")
    x0, x1, y0, y1 = c.domain
    if not (x1 > x0 and y1 > y0):
        raise ConfigurationError(f"domain must have positive extent, got {c.domain}")
    for name in ("nx", "ny", "n_steps"):
        v = getattr(c, name)
        if not isinstance(v, int) or v < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
    if not isinstance(c.output_snapshot_every, int) or c.output_snapshot_every < 0:
        raise ConfigurationError("output.snapshot_every must be a nonnegative integer")
    _positive(c.dt, "dt")
    _positive(c.linear_solver_tolerance, "linear_solver_tolerance")
    _positive(c.fluid_rho_f, "fluid.rho_f")
    _positive(c.fluid_nu, "fluid.nu")
    _positive(c.solid_kappa, "solid.kappa", allow_zero=True)
    _positive(c.solid_t_s, "solid.t_s")
    if c.solid_delta_rho is None and c.solid_rho_s is None:
        raise ConfigurationError("give solid.delta_rho or solid.rho_s")
    if c.solid_delta_rho is not None:
        if c.solid_delta_rho < 0:
            raise ConfigurationError(
                f"solid.delta_rho must be nonnegative (solid lighter than fluid), got {c.solid_delta_rho}")
        if c.solid_rho_s is not None:
            expected = (c.solid_rho_s - c.fluid_rho_f) * (c.solid_t_s if c.codim == 1 else 1.0)
            if not math.isclose(expected, c.solid_delta_rho, rel_tol=1e-12, abs_tol=1e-14):
                raise ConfigurationError("solid.delta_rho disagrees with solid.rho_s, fluid.rho_f and solid.t_s")
    elif c.solid_rho_s < c.fluid_rho_f:
        raise ConfigurationError("solid.rho_s below fluid.rho_f gives a negative delta_rho")
    if c.coupling_quad_points is not None and c.coupling_quad_points < 1:
        raise ConfigurationError("coupling.quad_points must be positive")
    if c.initial_velocity_kind == "opposing_shear":
        _positive(c.initial_velocity_transition_width, "initial_velocity.transition_width")

    kind = c.geometry_kind
    if kind in ("ellipse_curve", "disc"):
        _pair(c.geometry_center, "geometry.center")
        _pair(c.geometry_axes, "geometry.axes")
        a, b = c.geometry_axes
        _positive(a, "geometry.axes[0]")
        _positive(b, "geometry.axes[1]")
    if kind == "ellipse_curve":
        if c.geometry_m is None and c.geometry_h_s is None:
            raise ConfigurationError("ellipse_curve needs geometry.m or geometry.h_s")
        if c.geometry_m is not None and c.geometry_m < 3:
            raise ConfigurationError(f"geometry.m must be at least 3, got {c.geometry_m}")
        if c.geometry_h_s is not None:
            _positive(c.geometry_h_s, "geometry.h_s")
        cx, cy = c.geometry_center
        _inside(c.domain, [(cx - a, cy), (cx + a, cy), (cx, cy - b), (cx, cy + b)], "ellipse")
    elif kind == "disc":
        if not isinstance(c.geometry_refinement, int) or c.geometry_refinement < 0:
            raise ConfigurationError("geometry.refinement must be a nonnegative integer")
        _pair(c.geometry_stretch, "geometry.stretch")
        sx, sy = c.geometry_stretch
        _positive(sx, "geometry.stretch[0]")
        _positive(sy, "geometry.stretch[1]")
        cx, cy = c.geometry_center
        _inside(c.domain, [(cx - a * sx, cy), (cx + a * sx, cy), (cx, cy - b * sy), (cx, cy + b * sy)], "disc")
    else:
        centers = c.geometry_centers
        if not (isinstance(centers, tuple) and len(centers) >= 1 and all(isinstance(p, tuple) for p in centers)):
            raise ConfigurationError("geometry.centers must be 'x, y; x, y'")
        for p in centers:
            _pair(p, "geometry.centers entry")
        _positive(c.geometry_radius, "geometry.radius")
        if c.geometry_m is None and c.geometry_h_s is None:
            raise ConfigurationError("two_circles needs geometry.m or geometry.h_s")
        if c.geometry_m is not None and c.geometry_m < 3:
            raise ConfigurationError(f"geometry.m must be at least 3, got {c.geometry_m}")
        r = c.geometry_radius
        for cx, cy in centers:
            _inside(c.domain, [(cx - r, cy), (cx + r, cy), (cx, cy - r), (cx, cy + r)], "circle")
    if kind == "disc" and c.force_form == "nodal":
        raise ConfigurationError("force_form nodal applies to fibres only")
    if kind != "disc" and c.force_form == "jump":
        raise ConfigurationError("force_form jump applies to thick bodies only")
    return c
