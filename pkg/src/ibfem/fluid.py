"""Navier-Stokes operators on the fixed Eulerian mesh.

All vector operators use the component-blocked layout of
:class:`ibfem.fem.StokesPair`. The viscous form is ``nu (grad_s u, grad_s v)``
with ``grad_s = grad + grad^T`` (no factor 1/2).
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError

FLUID_QUADRATURE_DEGREE = 4
CONVECTION_QUADRATURE_DEGREE = 5


@dataclass(frozen=True)
class FluidParams:
    rho_f: float = 1.0
    nu: float = 1.0

    def __post_init__(self):
        if not (self.rho_f > 0 and self.nu > 0):
            raise InvalidArgumentError(f"fluid density and viscosity must be positive, got {self}")


@dataclass
class FluidState:
    u: np.ndarray
    p: np.ndarray
    t: float = 0.0

    @classmethod
    def rest(cls, pair):
        return cls(np.zeros(2 * pair.n_velocity), np.zeros(pair.n_pressure), 0.0)

    def copy(self):
        return FluidState(self.u.copy(), self.p.copy(), self.t)


def _scatter(dofs, local, n_rows, n_cols=None, col_dofs=None):
    col_dofs = dofs if col_dofs is None else col_dofs
    n_cols = n_rows if n_cols is None else n_cols
    r = np.broadcast_to(dofs[:, :, None], local.shape)
    c = np.broadcast_to(col_dofs[:, None, :], local.shape)
    return sp.csr_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=(n_rows, n_cols))


def vector_block(scalar):
    return sp.block_diag([scalar, scalar], format="csr")


def assemble_scalar_mass(pair, degree=FLUID_QUADRATURE_DEGREE):
    a = pair.assembly(degree)
    local = np.einsum("tq,qi,qj->tij", a.wdet, a.phi, a.phi)
    return _scatter(a.dofs, local, pair.n_velocity)


def assemble_mass(pair, degree=FLUID_QUADRATURE_DEGREE):
    """Vector velocity mass matrix ``(phi_j, phi_i)``."""
    return vector_block(assemble_scalar_mass(pair, degree))


def _gradient_products(pair, degree):
    a = pair.assembly(degree)
    g = a.grad
    prods = {}
    for ai, an in enumerate("xy"):
        for bi, bn in enumerate("xy"):
            # entry (i, j) = int d_a phi_i d_b phi_j
            prods[an + bn] = np.einsum("tq,tqi,tqj->tij", a.wdet, g[..., ai], g[..., bi])
    return a, prods


def assemble_viscous(pair, nu, degree=FLUID_QUADRATURE_DEGREE):
    """Matrix of ``nu (grad_s u, grad_s v)``; rigid motions lie in the kernel."""
    if not nu > 0:
        raise InvalidArgumentError("viscosity must be positive")
    a, D = _gradient_products(pair, degree)
    n = pair.n_velocity
    Kxx = _scatter(a.dofs, nu * (4 * D["xx"] + 2 * D["yy"]), n)
    Kyy = _scatter(a.dofs, nu * (2 * D["xx"] + 4 * D["yy"]), n)
    # row v_x (d_y phi_i), column u_y (d_x phi_j)
    Kxy = _scatter(a.dofs, nu * 2 * D["yx"], n)
    return sp.bmat([[Kxx, Kxy], [Kxy.T, Kyy]], format="csr")


def assemble_divergence(pair, degree=FLUID_QUADRATURE_DEGREE):
    """``B[k, i] = -(div phi_i, psi_k)``, shape (n_pressure, 2 n)."""
    a = pair.assembly(degree)
    blocks = []
    for c in range(2):
        local = -np.einsum("tq,qk,tqi->tki", a.wdet, a.psi, a.grad[..., c])
        blocks.append(_scatter(a.p_dofs, local, pair.n_pressure, pair.n_velocity, a.dofs))
    return sp.hstack(blocks, format="csr")


def pressure_mean_row(pair, degree=FLUID_QUADRATURE_DEGREE):
    """Row ``m`` with ``m . p = int p``."""
    a = pair.assembly(degree)
    local = np.einsum("tq,qk->tk", a.wdet, a.psi)
    return np.bincount(a.p_dofs.ravel(), weights=local.ravel(), minlength=pair.n_pressure)


def assemble_convection_skew(pair, w, degree=CONVECTION_QUADRATURE_DEGREE):
    """Skew-symmetrized convection at frozen transport field ``w``.

    Represents ``((w . grad u, v) - (w . grad v, u)) / 2``; the result is
    exactly antisymmetric in floating point. Density is not included.
    """
    n = pair.n_velocity
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        return sp.csr_matrix((2 * n, 2 * n))
    a = pair.assembly(degree)
    wx = a.phi @ w[:n][a.dofs].T  # (nq, nt)
    wy = a.phi @ w[n:][a.dofs].T
    adv = wx.T[:, :, None] * a.grad[..., 0] + wy.T[:, :, None] * a.grad[..., 1]
    # C[i, j] = int (w . grad phi_j) phi_i
    local = np.einsum("tq,qi,tqj->tij", a.wdet, a.phi, adv)
    C = _scatter(a.dofs, local, n).tocsr()
    N = (C - C.T) * 0.5
    return vector_block(N.tocsr())


def convection_matrix_unskewed(pair, w, degree=CONVECTION_QUADRATURE_DEGREE):
    """``(w . grad phi_j, phi_i)`` without skew symmetrization (scalar block)."""
    n = pair.n_velocity
    a = pair.assembly(degree)
    wx = a.phi @ np.asarray(w)[:n][a.dofs].T
    wy = a.phi @ np.asarray(w)[n:][a.dofs].T
    adv = wx.T[:, :, None] * a.grad[..., 0] + wy.T[:, :, None] * a.grad[..., 1]
    local = np.einsum("tq,qi,tqj->tij", a.wdet, a.phi, adv)
    return _scatter(a.dofs, local, n)


def velocity_boundary_dofs(pair):
    b = pair.velocity.boundary_dofs
    return np.concatenate([b, b + pair.n_velocity])


def apply_velocity_bc(A, b, boundary_dofs, values=None):
    """Symmetric elimination of Dirichlet velocity dofs.

    Returns ``(A_ff, b_f, free)`` where ``free`` indexes the retained dofs;
    the right-hand side is lifted by ``-A_fb g`` for nonzero boundary data.
    """
    n = A.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[boundary_dofs] = False
    free = np.flatnonzero(mask)
    A = sp.csr_matrix(A)
    A_ff = A[free][:, free]
    b_f = np.asarray(b, dtype=float)[free]
    if values is not None:
        g = np.zeros(n)
        g[boundary_dofs] = values
        b_f = b_f - A[free] @ g
    return A_ff, b_f, free


def expand(free, values, n):
    full = np.zeros(n)
    full[free] = values
    return full


def pressure_at_velocity_nodes(pair, p):
    """Pressure field sampled at the velocity nodes (for snapshots)."""
    return pair.pressure_evaluation(pair.velocity.dof_coords) @ p


class FluidOperators:
    """Time-independent fluid matrices for one mesh/pair/parameter set."""

    def __init__(self, pair, params):
        self.pair = pair
        self.params = params
        self.M = assemble_mass(pair)
        self.K = assemble_viscous(pair, params.nu)
        self.B = assemble_divergence(pair)
        self.mean_row = pressure_mean_row(pair)
        self.boundary = velocity_boundary_dofs(pair)
        mask = np.ones(2 * pair.n_velocity, dtype=bool)
        mask[self.boundary] = False
        self.free = np.flatnonzero(mask)
        self.B_free = self.B[:, self.free]

    @property
    def n_u(self):
        return 2 * self.pair.n_velocity

    def kinetic_energy(self, u):
        return 0.5 * self.params.rho_f * float(u @ (self.M @ u))

    def dissipation(self, u):
        return float(u @ (self.K @ u))

    def convection(self, w):
        return assemble_convection_skew(self.pair, w)
