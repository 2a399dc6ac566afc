"""Reference-element machinery and degree-of-freedom maps.

Shipped families on triangles: P0, P1, P2 and P1-iso-P2 (P1 on the once
refined triangle, sharing its node set with P2). On segments: P1.

Local ordering on a triangle is vertices first, then edges
``(0,1), (1,2), (2,0)``, counterclockwise.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateElementError, InvalidArgumentError
from .geometry import EulerianMesh, LagrangianMesh, locate_points
from .quadrature import QuadratureRule, quadrature_rule  # noqa: F401  (public re-export)

FAMILIES = ("P0", "P1", "P2", "P1isoP2")
N_LOCAL = {"P0": 1, "P1": 3, "P2": 6, "P1isoP2": 6}

# sub-triangles of the P1-iso-P2 macro element in local node numbering
ISO_SUBTRIANGLES = np.array([[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]])

STABLE_PAIRS = {
    "taylor_hood": ("P2", "P1"),
    "p1isop2_p0": ("P1isoP2", "P0"),
    "p2_p0": ("P2", "P0"),
}


@dataclass(frozen=True)
class ElementSpace:
    family: str
    components: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown element family {self.family!r}")
        if self.components not in (1, 2):
            raise InvalidArgumentError("components must be 1 or 2")

    @property
    def continuity(self):
        return "discontinuous" if self.family == "P0" else "continuous"

    @property
    def n_local(self):
        return N_LOCAL[self.family]


def _as_space(space):
    return space if isinstance(space, ElementSpace) else ElementSpace(space)


def barycentric(ref_point):
    ref = np.asarray(ref_point, dtype=float)
    return np.stack([1.0 - ref[..., 0] - ref[..., 1], ref[..., 0], ref[..., 1]], axis=-1)


def basis_from_barycentric(family, lam):
    """Shape function values and derivatives with respect to the barycentrics.

    Parameters
    ----------
    family : str
    lam : array (..., 3)

    Returns
    -------
    values : array (..., n_local)
    dlam : array (..., n_local, 3)
    """
    lam = np.asarray(lam, dtype=float)
    shape = lam.shape[:-1]
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    if family == "P0":
        return np.ones(shape + (1,)), np.zeros(shape + (1, 3))
    if family == "P1":
        return lam.copy(), np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
    if family == "P2":
        vals = np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                         4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)
        d = np.zeros(shape + (6, 3))
        for a in range(3):
            d[..., a, a] = 4 * lam[..., a] - 1
        for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            d[..., 3 + e, a] = 4 * lam[..., b]
            d[..., 3 + e, b] = 4 * lam[..., a]
        return vals, d
    if family == "P1isoP2":
        return _iso_basis(lam)
    raise InvalidArgumentError(f"unknown element family {family!r}")


# local edge index joining vertices (a, b), and the edge opposite a vertex
_EDGE_OF = {(0, 1): 3, (1, 0): 3, (1, 2): 4, (2, 1): 4, (2, 0): 5, (0, 2): 5}
_OPPOSITE_EDGE = {0: 4, 1: 5, 2: 3}


def _iso_basis(lam):
    shape = lam.shape[:-1]
    flat = lam.reshape(-1, 3)
    n = len(flat)
    vals = np.zeros((n, 6))
    d = np.zeros((n, 6, 3))
    region = np.full(n, 3)
    for a in (2, 1, 0):
        region[flat[:, a] >= 0.5] = a
    for a in range(3):
        idx = region == a
        b, c = (a + 1) % 3, (a + 2) % 3
        eb, ec = _EDGE_OF[(a, b)], _EDGE_OF[(a, c)]
        vals[idx, a] = 2 * flat[idx, a] - 1
        vals[idx, eb] = 2 * flat[idx, b]
        vals[idx, ec] = 2 * flat[idx, c]
        d[idx, a, a] = 2
        d[idx, eb, b] = 2
        d[idx, ec, c] = 2
    idx = region == 3
    for c in range(3):
        e = _OPPOSITE_EDGE[c]
        vals[idx, e] = 1 - 2 * flat[idx, c]
        d[idx, e, c] = -2
    return vals.reshape(shape + (6,)), d.reshape(shape + (6, 3))


def eval_basis(space, ref_point):
    """Values of all local shape functions at a reference point.

    Triangle families take ``(xi, eta)``; a segment P1 space is requested
    with ``family="P1"`` and a scalar ``ref_point`` in [0, 1].
    """
    space = _as_space(space)
    ref = np.asarray(ref_point, dtype=float)
    if ref.ndim == 0 or ref.shape[-1:] == (1,) and ref.ndim == 1:
        t = float(ref.reshape(-1)[0])
        return np.array([1.0 - t, t])
    vals, _ = basis_from_barycentric(space.family, barycentric(ref))
    return vals


def eval_basis_grad(space, ref_point, jacobian):
    """Physical gradients ``J^{-T} grad_ref phi``, one row per local function."""
    space = _as_space(space)
    J = np.asarray(jacobian, dtype=float)
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if abs(det) <= 1e-14 * max(1.0, np.abs(J).max() ** 2):
        raise DegenerateElementError(f"singular element jacobian (det={det:g})")
    _, dlam = basis_from_barycentric(space.family, barycentric(ref_point))
    # d lambda / d ref = [[-1,-1],[1,0],[0,1]]
    dref = dlam @ np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return dref @ np.linalg.inv(J)


@dataclass(frozen=True, eq=False)
class DofMap:
    n_dofs: int
    element_to_dofs: np.ndarray
    dof_coords: np.ndarray
    boundary_dofs: np.ndarray
    space: ElementSpace
    fine_triangles: np.ndarray = field(default=None)
    fine_parent: np.ndarray = field(default=None)

    @property
    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)


def _mesh_edges(tris):
    local = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges, inverse, counts = np.unique(np.sort(local, axis=1), axis=0,
                                       return_inverse=True, return_counts=True)
    nt = len(tris)
    tri_edges = inverse.reshape(3, nt).T
    return edges, tri_edges, counts


def build_dof_map(mesh, space):
    """Global numbering of a finite element space on an Eulerian or Lagrangian mesh."""
    space = _as_space(space)
    if isinstance(mesh, LagrangianMesh):
        if space.family != "P1":
            raise InvalidArgumentError("only P1 is shipped on the solid mesh")
        return DofMap(mesh.M, mesh.elements.copy(), mesh.reference_points().copy(),
                      np.zeros(0, dtype=np.int64), space)
    if not isinstance(mesh, EulerianMesh):
        raise InvalidArgumentError("unsupported mesh type")
    tris = mesh.triangles
    nv = len(mesh.vertices)
    if space.family == "P0":
        nt = len(tris)
        centroids = mesh.vertices[tris].mean(axis=1)
        return DofMap(nt, np.arange(nt)[:, None], centroids, np.zeros(0, dtype=np.int64), space)
    if space.family == "P1":
        bnd = np.flatnonzero(mesh.boundary_vertex_flags)
        return DofMap(nv, tris.copy(), mesh.vertices.copy(), bnd, space)
    edges, tri_edges, counts = _mesh_edges(tris)
    e2d = np.hstack([tris, nv + tri_edges])
    coords = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])])
    bnd_edges = np.flatnonzero(counts == 1)
    bnd = np.concatenate([np.flatnonzero(mesh.boundary_vertex_flags), nv + bnd_edges])
    bnd.sort()
    fine = parent = None
    if space.family == "P1isoP2":
        fine = e2d[:, ISO_SUBTRIANGLES].reshape(-1, 3)
        parent = np.repeat(np.arange(len(tris)), 4)
    return DofMap(nv + len(edges), e2d, coords, bnd, space, fine, parent)


def triangle_gradients(p):
    """Barycentric gradients and areas for triangles ``p`` of shape (n, 3, 2)."""
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(np.abs(det) <= 0):
        raise DegenerateElementError("degenerate triangle in mesh")
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    g = np.empty((len(p), 3, 2))
    g[:, 1] = inv[:, 0]
    g[:, 2] = inv[:, 1]
    g[:, 0] = -(g[:, 1] + g[:, 2])
    return g, 0.5 * det


@dataclass(eq=False)
class AssemblyData:
    """Per-triangle quadrature data for the velocity/pressure pair.

    ``phi`` (nq, nloc) and ``grad`` (nt, nq, nloc, 2) refer to the local
    velocity basis on the assembly triangles (coarse for P2, refined for
    P1-iso-P2); ``wdet`` (nt, nq) are physical quadrature weights.
    """

    dofs: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    wdet: np.ndarray
    p_dofs: np.ndarray
    psi: np.ndarray


class StokesPair:
    """Velocity/pressure mixed space on an Eulerian mesh.

    Velocity vectors are stored component-blocked: ``[u_x (n), u_y (n)]``.
    """

    def __init__(self, mesh, name="taylor_hood"):
        if name not in STABLE_PAIRS:
            raise ConfigurationError(
                f"element pair {name!r} is not a shipped Stokes-stable pair; choose from {sorted(STABLE_PAIRS)}")
        self.name = name
        self.mesh = mesh
        vel, pres = STABLE_PAIRS[name]
        self.velocity = build_dof_map(mesh, ElementSpace(vel, 2))
        self.pressure = build_dof_map(mesh, ElementSpace(pres, 1))
        self._cache = {}

    @classmethod
    def from_families(cls, mesh, velocity_family, pressure_family):
        for name, pair in STABLE_PAIRS.items():
            if pair == (velocity_family, pressure_family):
                return cls(mesh, name)
        raise ConfigurationError(
            f"{velocity_family}-{pressure_family} is not Stokes-stable (or not shipped)")

    @property
    def n_velocity(self):
        """Scalar velocity dofs per component."""
        return self.velocity.n_dofs

    @property
    def n_pressure(self):
        return self.pressure.n_dofs

    @property
    def pressure_continuous(self):
        return self.pressure.space.continuity == "continuous"

    def assembly(self, degree=4):
        if degree in self._cache:
            return self._cache[degree]
        rule = quadrature_rule("triangle", degree)
        lam = barycentric(rule.points)
        vfam = self.velocity.space.family
        if vfam == "P1isoP2":
            dofs = self.velocity.fine_triangles
            local = "P1"
            parent = self.velocity.fine_parent
        else:
            dofs = self.velocity.element_to_dofs
            local = vfam
            parent = np.arange(len(dofs))
        p = self.velocity.dof_coords[dofs[:, :3]]
        glam, area = triangle_gradients(p)
        phi, dlam = basis_from_barycentric(local, lam)
        grad = np.einsum("qia,tad->tqid", dlam, glam)
        wdet = 2.0 * area[:, None] * rule.weights[None, :]
        pfam = self.pressure.space.family
        psi, _ = basis_from_barycentric(pfam, lam)
        p_dofs = self.pressure.element_to_dofs[parent]
        if pfam == "P1" and vfam == "P1isoP2":
            raise ConfigurationError("P1-iso-P2 with continuous P1 pressure is not shipped")
        data = AssemblyData(dofs, phi, grad, wdet, p_dofs, psi)
        self._cache[degree] = data
        return data

    def evaluation(self, points, with_grad=False, escaped=True):
        """Sparse matrices evaluating scalar velocity fields at ``points``.

        Returns ``E`` (npts x n) and, when requested, ``(Gx, Gy)`` for the
        gradient components. Raises StructureEscapedError for points
        outside the domain.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        elem, lam = locate_points(self.mesh, pts, escaped=escaped)
        vals, dlam = basis_from_barycentric(self.velocity.space.family, lam)
        dofs = self.velocity.element_to_dofs[elem]
        rows = np.repeat(np.arange(len(pts)), dofs.shape[1])
        shape = (len(pts), self.n_velocity)
        E = sp.csr_matrix((vals.ravel(), (rows, dofs.ravel())), shape=shape)
        if not with_grad:
            return E
        tri = self.mesh.vertices[self.mesh.triangles[elem]]
        glam, _ = triangle_gradients(tri)
        g = np.einsum("pia,pad->pid", dlam, glam)
        Gx = sp.csr_matrix((g[..., 0].ravel(), (rows, dofs.ravel())), shape=shape)
        Gy = sp.csr_matrix((g[..., 1].ravel(), (rows, dofs.ravel())), shape=shape)
        return E, (Gx, Gy)

    def pressure_evaluation(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        elem, lam = locate_points(self.mesh, pts)
        vals, _ = basis_from_barycentric(self.pressure.space.family, lam)
        dofs = self.pressure.element_to_dofs[elem]
        rows = np.repeat(np.arange(len(pts)), dofs.shape[1])
        return sp.csr_matrix((vals.ravel(), (rows, dofs.ravel())), shape=(len(pts), self.n_pressure))

    def interpolate(self, func):
        """Nodal interpolant of a vector field ``func(x, y) -> (u, v)`` (blocked layout)."""
        c = self.velocity.dof_coords
        u, v = func(c[:, 0], c[:, 1])
        return np.concatenate([np.broadcast_to(u, len(c)), np.broadcast_to(v, len(c))]).astype(float)

    def interpolate_pressure(self, func):
        c = self.pressure.dof_coords
        return np.broadcast_to(func(c[:, 0], c[:, 1]), len(c)).astype(float)
