"""Scalar observables of a run: enclosed area, drift rate, shape, time series."""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .solid import deformation_gradients

MIN_DRIFT_SAMPLES = 10


def enclosed_area(solid):
    """Area enclosed by the current configuration.

    Fibres: signed shoelace sum over the (closed) edges, positive for
    counterclockwise curves; several closed curves add.
    Thick bodies: ``sum |det F| |T|`` over the reference triangles, i.e. the
    area of the deformed P1 mesh.
    """
    mesh, X = solid.mesh, np.asarray(solid.X, dtype=float)
    if mesh.codim == 1:
        a, b = X[mesh.edges[:, 0]], X[mesh.edges[:, 1]]
        return float(0.5 * np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))
    F = deformation_gradients(mesh, X)
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    return float(np.sum(np.abs(det) * mesh.measures))


def area_drift_rate(times, areas, area0=None):
    """Least-squares slope of ``A(t) / A0``, in relative area per unit time."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(areas, dtype=float)
    if t.shape != a.shape or t.ndim != 1:
        raise InvalidArgumentError("times and areas must be 1D arrays of equal length")
    if len(t) < MIN_DRIFT_SAMPLES:
        raise InvalidArgumentError(f"need at least {MIN_DRIFT_SAMPLES} samples, got {len(t)}")
    a0 = a[0] if area0 is None else area0
    if not a0 > 0:
        raise InvalidArgumentError("reference area must be positive")
    slope, _ = np.polyfit(t, a / a0, 1)
    return float(slope)


def eccentricity(X, center=None):
    """``(r_max - r_min) / (r_max + r_min)`` of node radii about ``center``."""
    X = np.asarray(X, dtype=float)
    c = X.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    r = np.linalg.norm(X - c, axis=1)
    s = r.max() + r.min()
    return float((r.max() - r.min()) / s) if s > 0 else 0.0


def relative_change(values):
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(v - v[0])) / abs(v[0])) if v[0] != 0 else float(np.max(np.abs(v)))


@dataclass
class TimeSeries:
    """Columns of per-step scalars, appended row by row."""

    columns: dict = field(default_factory=dict)

    def append(self, **values):
        n = len(self)
        for k in values:
            if k not in self.columns:
                self.columns[k] = [None] * n
        for k, col in self.columns.items():
            col.append(values.get(k))

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, key):
        return np.array([np.nan if v is None else v for v in self.columns[key]], dtype=float)

    def keys(self):
        return list(self.columns)

    @classmethod
    def from_reports(cls, reports):
        ts = cls()
        for r in reports:
            ts.append(**r.as_dict())
        return ts
