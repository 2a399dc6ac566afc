"""The immersed elastic structure.

Positions are nodal arrays of shape ``(M, 2)``. Block vectors use the
component-major layout ``[X_x (M), X_y (M)]`` to match the fluid side.

Only the linear model ``P(F) = kappa F`` (energy density ``kappa/2 |F|^2``)
ships, for thick bodies (codim 0) and fibres (codim 1). For codim 1 the
thickness multiplies kappa once, in :meth:`SolidParams.effective_kappa`.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateElementError, InvalidArgumentError, UnsupportedError
from .quadrature import quadrature_rule

STARTUPS = ("zero_solid_velocity", "paper_literal")


@dataclass(frozen=True)
class SolidParams:
    """Material data of the structure.

    ``delta_rho`` is the excess density: ``rho_s - rho_f`` for thick bodies
    and ``(rho_s - rho_f) t_s`` for fibres.
    """

    kappa: float
    rho_s: float
    t_s: float
    delta_rho: float
    codim: int

    @classmethod
    def from_densities(cls, kappa, rho_s, rho_f, codim, t_s=1.0):
        if codim not in (0, 1):
            raise InvalidArgumentError(f"codim must be 0 or 1, got {codim}")
        if codim == 1 and not t_s > 0:
            raise ConfigurationError("fibre thickness must be positive")
        drho = (rho_s - rho_f) * (t_s if codim == 1 else 1.0)
        return cls(float(kappa), float(rho_s), float(t_s), float(drho), codim)

    def __post_init__(self):
        if self.kappa < 0:
            raise ConfigurationError(f"elastic constant must be nonnegative, got {self.kappa}")
        if self.delta_rho < 0:
            raise ConfigurationError(
                f"solid lighter than fluid (delta_rho={self.delta_rho}) is not supported")

    @property
    def effective_kappa(self):
        return self.kappa * (self.t_s if self.codim == 1 else 1.0)


@dataclass(frozen=True)
class ElasticModel:
    """Quadratic energy ``W(F) = kappa/2 |F|^2``, i.e. ``P(F) = kappa F``.

    Extension point: a model needs ``stress(F)``, ``density(F)`` and, for
    the implicit DLM step, a constant PSD Hessian (``linear`` is True).
    """

    kind: str
    kappa: float

    linear = True

    @classmethod
    def for_params(cls, params):
        kind = "fiber_codim1" if params.codim == 1 else "linear_codim0"
        return cls(kind, params.effective_kappa)

    def density(self, F):
        return 0.5 * self.kappa * np.sum(F * F, axis=(-2, -1))

    def stress(self, F):
        return self.kappa * F


@dataclass
class SolidState:
    X: np.ndarray
    X_prev: np.ndarray
    X_prev2: np.ndarray
    mesh: object

    @classmethod
    def initial(cls, mesh, X0=None, startup="zero_solid_velocity"):
        if startup not in STARTUPS:
            raise ConfigurationError(f"unknown startup {startup!r}; choose from {STARTUPS}")
        X0 = (mesh.X0 if X0 is None else np.asarray(X0, dtype=float)).copy()
        if startup == "paper_literal":
            prev = np.zeros_like(X0)
        else:
            prev = X0.copy()
        return cls(X0, prev, prev.copy(), mesh)

    def advanced(self, X_new):
        return SolidState(np.asarray(X_new, dtype=float), self.X, self.X_prev, self.mesh)

    def copy(self):
        return SolidState(self.X.copy(), self.X_prev.copy(), self.X_prev2.copy(), self.mesh)


def to_block(X):
    return np.asarray(X).T.ravel()


def from_block(x):
    return np.asarray(x).reshape(2, -1).T


def _reference_jacobians(mesh):
    """Inverse reference jacobians for codim 0 (M_e, 2, 2)."""
    s = mesh.vertices[mesh.elements]
    J = np.stack([s[:, 1] - s[:, 0], s[:, 2] - s[:, 0]], axis=-1)
    det = np.linalg.det(J)
    if np.any(np.abs(det) <= 1e-15 * mesh.h_s ** 2):
        raise DegenerateElementError("degenerate reference triangle in solid mesh")
    return np.linalg.inv(J)


def deformation_gradients(mesh, X):
    """Piecewise constant ``F = grad_s X`` for all elements: (M_e, 2, m)."""
    Xe = np.asarray(X)[mesh.elements]
    if mesh.codim == 1:
        return ((Xe[:, 1] - Xe[:, 0]) / mesh.measures[:, None])[:, :, None]
    D = np.stack([Xe[:, 1] - Xe[:, 0], Xe[:, 2] - Xe[:, 0]], axis=-1)
    return D @ _reference_jacobians(mesh)


def deformation_gradient(state, element):
    """Deformation gradient (2 x m) on one solid element."""
    if not 0 <= element < state.mesh.M_e:
        raise InvalidArgumentError(f"element {element} out of range")
    mesh = state.mesh
    sub = np.asarray(state.X)[mesh.elements[element]]
    if mesh.codim == 1:
        return ((sub[1] - sub[0]) / mesh.measures[element])[:, None]
    s = mesh.vertices[mesh.elements[element]]
    J = np.column_stack([s[1] - s[0], s[2] - s[0]])
    if abs(np.linalg.det(J)) <= 1e-15 * mesh.h_s ** 2:
        raise DegenerateElementError(f"degenerate reference element {element}")
    return np.column_stack([sub[1] - sub[0], sub[2] - sub[0]]) @ np.linalg.inv(J)


def elastic_energy(state, model):
    """``E(X) = sum_k |T_k| W(F_k)`` computed element by element."""
    F = deformation_gradients(state.mesh, state.X)
    return float(np.sum(state.mesh.measures * model.density(F)))


def _basis_gradients(mesh):
    """Reference gradients of the P1 solid basis per element: (M_e, nloc, m)."""
    if mesh.codim == 1:
        h = mesh.measures
        return np.stack([-1.0 / h, 1.0 / h], axis=-1)[:, :, None]
    inv = _reference_jacobians(mesh)
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.einsum("ia,ead->eid", ref, inv)


def _scatter(mesh, local):
    el = mesh.elements
    r = np.broadcast_to(el[:, :, None], local.shape).ravel()
    c = np.broadcast_to(el[:, None, :], local.shape).ravel()
    return sp.csr_matrix((local.ravel(), (r, c)), shape=(mesh.M, mesh.M))


def solid_mass_matrix(mesh):
    """Scalar ``(chi_j, chi_i)_B`` (exact P1 element matrices)."""
    meas = mesh.measures
    if mesh.codim == 1:
        Ml = meas[:, None, None] * np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        Ml = meas[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _scatter(mesh, Ml)


def assemble_solid_matrices(mesh, model):
    """Scalar solid mass ``(chi_j, chi_i)_B`` and stiffness ``kappa (grad chi_j, grad chi_i)_B``.

    Both act componentwise on positions; use :func:`vector_block` for the
    block layout.
    """
    G = _basis_gradients(mesh)
    Kl = model.kappa * mesh.measures[:, None, None] * np.einsum("eid,ejd->eij", G, G)
    return solid_mass_matrix(mesh), _scatter(mesh, Kl)


def vector_block(scalar):
    return sp.block_diag([scalar, scalar], format="csr")


def elastic_force(state, model):
    """Restoring nodal force ``-dE/dX = -K_s X`` (shape (M, 2)).

    Its negative, ``G_i = (P(F), grad_s chi_i)_B``, is the elastic term of
    the DLM solid equation.
    """
    _, K = assemble_solid_matrices(state.mesh, model)
    return -(K @ np.asarray(state.X))


def stress_divergence_load(state, model):
    """``G_i = (P(F), grad_s chi_i)_B`` assembled element by element (shape (M, 2))."""
    mesh = state.mesh
    F = deformation_gradients(mesh, state.X)
    P = model.stress(F)
    G = _basis_gradients(mesh)
    local = mesh.measures[:, None, None] * np.einsum("ecd,eid->eic", P, G)
    out = np.zeros((mesh.M, 2))
    for c in range(2):
        out[:, c] = np.bincount(mesh.elements.ravel(), weights=local[..., c].ravel(), minlength=mesh.M)
    return out


@dataclass(frozen=True)
class JumpForce:
    """Jumps ``[[P]] = P+ N+ + P- N-`` on reference edges.

    Boundary edges of B carry their one-sided traction ``P N``.
    """

    edges: np.ndarray
    jumps: np.ndarray
    lengths: np.ndarray


def elastic_force_jump(state, model):
    mesh = state.mesh
    if mesh.codim != 0:
        raise UnsupportedError("the edge-jump force form is defined for thick (codim-0) bodies")
    F = deformation_gradients(mesh, state.X)
    P = model.stress(F)
    s = mesh.vertices
    el = mesh.elements
    local_edges = [(0, 1), (1, 2), (2, 0)]
    keys, contrib = [], []
    for a, b in local_edges:
        t = s[el[:, b]] - s[el[:, a]]
        normal = np.column_stack([t[:, 1], -t[:, 0]]) / np.linalg.norm(t, axis=1)[:, None]
        keys.append(np.sort(np.column_stack([el[:, a], el[:, b]]), axis=1))
        contrib.append(np.einsum("ecd,ed->ec", P, normal))
    keys = np.vstack(keys)
    contrib = np.vstack(contrib)
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    jumps = np.zeros((len(edges), 2))
    np.add.at(jumps, inverse, contrib)
    lengths = np.linalg.norm(s[edges[:, 1]] - s[edges[:, 0]], axis=1)
    return JumpForce(edges, jumps, lengths)


def pair_volume_form(state, model, grad_v, degree=4):
    """``-int_B P(F) : grad v(X(s)) F ds`` for a test field given by its jacobian.

    ``grad_v(points)`` returns (n, 2, 2) with ``[.., c, a] = d v_c / d x_a``.
    """
    mesh = state.mesh
    F = deformation_gradients(mesh, state.X)
    P = model.stress(F)
    rule = quadrature_rule(mesh.element_kind, degree)
    Xe = np.asarray(state.X)[mesh.elements]
    if mesh.codim == 1:
        t = rule.points[:, 0]
        lam = np.column_stack([1 - t, t])
    else:
        r = rule.points
        lam = np.column_stack([1 - r[:, 0] - r[:, 1], r[:, 0], r[:, 1]])
    pts = np.einsum("qa,ead->eqd", lam, Xe)
    Dv = grad_v(pts.reshape(-1, 2)).reshape(pts.shape[0], pts.shape[1], 2, 2)
    scale = 1.0 if mesh.codim == 1 else 2.0  # reference triangle area is 1/2
    integrand = np.einsum("ecb,eqca,eab->eq", P, Dv, F)
    return -float(np.sum(scale * mesh.measures[:, None] * rule.weights[None, :] * integrand))


def pair_jump_form(state, model, v, degree=4):
    """``-sum_e int_e [[P]] . v(X) dA`` for a test field ``v(points) -> (n, 2)``."""
    jf = elastic_force_jump(state, model)
    rule = quadrature_rule("segment", degree)
    t = rule.points[:, 0]
    X = np.asarray(state.X)
    Xa, Xb = X[jf.edges[:, 0]], X[jf.edges[:, 1]]
    pts = (1 - t)[None, :, None] * Xa[:, None] + t[None, :, None] * Xb[:, None]
    vals = v(pts.reshape(-1, 2)).reshape(len(jf.edges), len(t), 2)
    integrand = np.einsum("ec,eqc->eq", jf.jumps, vals)
    return -float(np.sum(jf.lengths[:, None] * rule.weights[None, :] * integrand))


class SolidOperators:
    """Constant solid matrices for one mesh/model pair."""

    def __init__(self, mesh, model, params):
        self.mesh = mesh
        self.model = model
        self.params = params
        self.M_s, self.K_s = assemble_solid_matrices(mesh, model)
        self.M_block = vector_block(self.M_s)
        self.K_block = vector_block(self.K_s)

    def energy(self, X):
        X = np.asarray(X)
        return 0.5 * float(np.sum(X * (self.K_s @ X)))

    def kinetic(self, X, X_prev, dt):
        V = (np.asarray(X) - np.asarray(X_prev)) / dt
        return 0.5 * self.params.delta_rho * float(np.sum(V * (self.M_s @ V)))
