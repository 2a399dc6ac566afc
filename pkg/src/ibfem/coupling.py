"""Eulerian-Lagrangian exchange.

Every coupling integral is a composite quadrature over the solid
reference elements: the mapped points ``X(s_q)`` are located in the fluid
mesh and the fluid basis is evaluated there. This replaces any regularized
delta kernel. The multiplier space is the solid P1 space and both coupling
forms are the L2(B) product, so ``L_s`` is the solid mass matrix.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, UnsupportedError
from .geometry import solid_quadrature_points
from .quadrature import rule_with_points
from .solid import (
    assemble_solid_matrices,
    deformation_gradients,
    elastic_force_jump,
    solid_mass_matrix,
    vector_block,
)


@dataclass(frozen=True)
class CouplingConfig:
    inner_product: str = "L2"
    quad_points_per_solid_element: int = None

    def __post_init__(self):
        if self.inner_product != "L2":
            raise UnsupportedError("only the L2 coupling product is shipped")
        q = self.quad_points_per_solid_element
        if q is not None and q < 1:
            raise InvalidArgumentError("need at least one quadrature point per solid element")

    def points_for(self, mesh):
        q = self.quad_points_per_solid_element
        if q is None:
            return 4 if mesh.codim == 1 else 7
        return q


def _solid_basis_at(mesh, rule):
    """Sparse matrix of solid P1 basis values at the composite quadrature points."""
    if mesh.codim == 1:
        t = rule.points[:, 0]
        lam = np.column_stack([1 - t, t])
    else:
        r = rule.points
        lam = np.column_stack([1 - r[:, 0] - r[:, 1], r[:, 0], r[:, 1]])
    nq = len(rule.weights)
    rows = np.arange(mesh.M_e * nq).reshape(mesh.M_e, nq)
    r = np.broadcast_to(rows[:, :, None], (mesh.M_e, nq, lam.shape[1]))
    c = np.broadcast_to(mesh.elements[:, None, :], r.shape)
    v = np.broadcast_to(lam[None], r.shape)
    return sp.csr_matrix((v.ravel(), (r.ravel(), c.ravel())), shape=(mesh.M_e * nq, mesh.M))


def _weights(mesh, rule):
    scale = 1.0 if mesh.codim == 1 else 2.0
    return (scale * mesh.measures[:, None] * rule.weights[None, :]).ravel()


class SolidSampling:
    """Fluid basis sampled along a solid configuration.

    Holds the composite quadrature on the solid mesh mapped by ``X`` and the
    sparse evaluation matrix ``E`` of the scalar fluid basis at those
    points (``E[q, j] = phi_j(X(s_q))``).
    """

    def __init__(self, pair, mesh, X, config=CouplingConfig(), with_grad=False):
        self.pair = pair
        self.mesh = mesh
        self.X = np.asarray(X, dtype=float)
        n_points = config.points_for(mesh)
        pts, rule = solid_quadrature_points(mesh, self.X, n_points)
        self.rule = rule
        self.points = pts.reshape(-1, 2)
        self.w = _weights(mesh, rule)
        self.Z = _solid_basis_at(mesh, rule)
        if with_grad:
            self.E, self.G = pair.evaluation(self.points, with_grad=True)
        else:
            self.E = pair.evaluation(self.points)
            self.G = None

    def L_f(self):
        """Scalar ``(L_f)_{lj} = int_B zeta_l phi_j(X(s)) ds`` (M x n)."""
        return (self.Z.T.multiply(self.w[None, :]) @ self.E).tocsr()

    def gram(self):
        """Scalar ``int_B phi_j(X) phi_i(X) ds`` (n x n)."""
        return (self.E.T.multiply(self.w[None, :]) @ self.E).tocsr()

    def values(self, u):
        """Fluid velocity (blocked) at the quadrature points, shape (nq, 2)."""
        n = self.pair.n_velocity
        return np.column_stack([self.E @ u[:n], self.E @ u[n:]])


def assemble_L_s(mesh):
    """Scalar ``(L_s)_{lj} = (zeta_l, chi_j)_B``; equals the solid mass matrix."""
    return solid_mass_matrix(mesh)


def assemble_L_f(solid, pair, config=CouplingConfig()):
    return SolidSampling(pair, solid.mesh, solid.X, config).L_f()


def assemble_inertial_coupling(solid, pair, delta_rho, u_n, dt, config=CouplingConfig()):
    """Implicit and explicit parts of the FE-IBM excess-inertia term.

    Returns ``(M_ib, rhs)``: ``M_ib = delta_rho int_B phi_j(X^n) phi_i(X^n)``
    (vector block, to be added to the left side with weight ``1/dt``) and
    ``rhs_i = delta_rho / dt int_B u^n(X^{n-1}) . phi_i(X^n)``.
    """
    n = pair.n_velocity
    if delta_rho < 0:
        raise InvalidArgumentError("delta_rho must be nonnegative")
    if delta_rho == 0:
        return sp.csr_matrix((2 * n, 2 * n)), np.zeros(2 * n)
    now = SolidSampling(pair, solid.mesh, solid.X, config)
    prev = SolidSampling(pair, solid.mesh, solid.X_prev, config)
    M_ib = delta_rho * vector_block(now.gram())
    up = prev.values(u_n)
    Ew = now.E.T.multiply(now.w[None, :]).tocsr()
    rhs = (delta_rho / dt) * np.concatenate([Ew @ up[:, 0], Ew @ up[:, 1]])
    return M_ib, rhs


def interp_velocity(u, solid, pair):
    """Fluid velocity at the solid nodes, shape (M, 2)."""
    E = pair.evaluation(solid.X)
    n = pair.n_velocity
    return np.column_stack([E @ u[:n], E @ u[n:]])


def node_evaluation(solid, pair):
    return pair.evaluation(solid.X)


def spread_elastic_force(solid, model, pair, config=CouplingConfig(), form="auto"):
    """Fluid load ``b_i = -int_B P(F) : grad_s [phi_i(X(s))] ds`` (blocked, length 2n).

    ``form``:
      * ``"volume"``: chain rule ``grad phi_i(X(s)) F`` and composite
        quadrature on the solid elements;
      * ``"jump"``: edge jumps of ``P`` (thick bodies only);
      * ``"nodal"``: for fibres the derivative of ``phi_i(X(s))`` along a
        segment integrates exactly to endpoint differences, so the load is
        ``-sum_i G_i phi(X_i)``;
      * ``"auto"``: ``nodal`` for fibres, ``volume`` for thick bodies.
    """
    mesh = solid.mesh
    n = pair.n_velocity
    if form == "auto":
        form = "nodal" if mesh.codim == 1 else "volume"
    if form == "nodal":
        if mesh.codim != 1:
            raise UnsupportedError("nodal force form applies to fibres only")
        _, K = assemble_solid_matrices(mesh, model)
        G = K @ solid.X
        E = pair.evaluation(solid.X)
        return -np.concatenate([E.T @ G[:, 0], E.T @ G[:, 1]])
    if form == "volume":
        s = SolidSampling(pair, mesh, solid.X, config, with_grad=True)
        F = deformation_gradients(mesh, solid.X)
        H = np.einsum("ecb,eab->eca", model.stress(F), F)  # P F^T
        nq = s.rule.n_points
        Hq = np.repeat(H, nq, axis=0) * s.w[:, None, None]
        Gx, Gy = s.G
        out = []
        for c in range(2):
            out.append(-(Gx.T @ Hq[:, c, 0] + Gy.T @ Hq[:, c, 1]))
        return np.concatenate(out)
    if form == "jump":
        jf = elastic_force_jump(solid, model)
        rule = rule_with_points("segment", 4)
        t = rule.points[:, 0]
        Xa, Xb = solid.X[jf.edges[:, 0]], solid.X[jf.edges[:, 1]]
        pts = (1 - t)[None, :, None] * Xa[:, None] + t[None, :, None] * Xb[:, None]
        E = pair.evaluation(pts.reshape(-1, 2))
        w = (jf.lengths[:, None] * rule.weights[None, :]).ravel()
        J = np.repeat(jf.jumps, len(t), axis=0) * w[:, None]
        return -np.concatenate([E.T @ J[:, 0], E.T @ J[:, 1]])
    raise InvalidArgumentError(f"unknown force form {form!r}")
