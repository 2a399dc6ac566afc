"""Eulerian and Lagrangian meshes, point location and solid mesh metrics.

The Eulerian mesh is a structured triangulation of a rectangle that never
changes during a run. The Lagrangian mesh lives on the reference
configuration of the solid: a closed polygonal curve (codimension one) or a
triangulated disc/ellipse (codimension zero).
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError, StructureEscapedError
from .quadrature import rule_with_points

# relative slack for points that sit on the boundary up to roundoff
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EulerianMesh:
    """Structured triangulation of ``[x0, x1] x [y0, y1]``.

    Cell ``(i, j)`` has index ``k = j * nx + i`` and is split along the
    lower-left to upper-right diagonal into triangles ``2k`` (below the
    diagonal) and ``2k + 1`` (above). Vertex ``(i, j)`` has index
    ``j * (nx + 1) + i``.
    """

    domain: tuple
    nx: int
    ny: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_flags: np.ndarray
    h_x: float
    diameter: float

    @property
    def dx(self):
        return (self.domain[1] - self.domain[0]) / self.nx

    @property
    def dy(self):
        return (self.domain[3] - self.domain[2]) / self.ny

    @property
    def area(self):
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        return 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def contains(self, points, tol=_DOMAIN_TOL):
        points = np.atleast_2d(points)
        x0, x1, y0, y1 = self.domain
        sx, sy = tol * (x1 - x0), tol * (y1 - y0)
        return ((points[:, 0] >= x0 - sx) & (points[:, 0] <= x1 + sx)
                & (points[:, 1] >= y0 - sy) & (points[:, 1] <= y1 + sy))


@dataclass(frozen=True)
class PointLocation:
    element_index: int
    barycentric: tuple


@dataclass(frozen=True, eq=False)
class LagrangianMesh:
    """Reference mesh of the solid.

    For ``codim == 1`` the reference coordinates are arclength parameters
    ``s`` (shape ``(M,)``) and the elements are segments; for ``codim == 0``
    they are planar points (shape ``(M, 2)``) and the elements are
    counterclockwise triangles. ``X0`` is the initial embedding in the
    fluid domain.
    """

    codim: int
    vertices: np.ndarray
    elements: np.ndarray
    closed: bool
    X0: np.ndarray
    measures: np.ndarray
    edges: np.ndarray
    h_s: float
    n_components: int = 1
    boundary_edges: np.ndarray = field(default=None)

    @property
    def M(self):
        return len(self.X0)

    @property
    def M_e(self):
        return len(self.elements)

    @property
    def measure(self):
        return float(self.measures.sum())

    @property
    def element_kind(self):
        return "segment" if self.codim == 1 else "triangle"

    def reference_points(self):
        """Reference coordinates as an (M, d_ref) array."""
        v = self.vertices
        return v[:, None] if v.ndim == 1 else v


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def build_eulerian_mesh(rect, nx, ny):
    """Structured mesh of ``2 * nx * ny`` right triangles.

    Parameters
    ----------
    rect : sequence of 4 floats
        ``(x0, x1, y0, y1)``.
    nx, ny : int
        Cell counts per axis.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    x0, x1, y0, y1 = (float(c) for c in rect)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError(f"degenerate rectangle {rect}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10, v01 = v00 + 1, v00 + nx + 1
    v11 = v01 + 1
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])

    iv, jv = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    boundary = ((iv == 0) | (iv == nx) | (jv == 0) | (jv == ny)).ravel()
    dx, dy = (x1 - x0) / nx, (y1 - y0) / ny
    return EulerianMesh(
        domain=(x0, x1, y0, y1), nx=nx, ny=ny, vertices=vertices,
        triangles=tris, boundary_vertex_flags=boundary,
        h_x=max(dx, dy), diameter=float(np.hypot(dx, dy)),
    )


def locate_points(mesh, points, escaped=False):
    """Vectorized point location.

    Returns ``(elements, barycentric)`` with barycentric coordinates ordered
    like the vertices of each triangle. Points on shared edges or vertices
    go to the lowest-index incident triangle.

    Raises OutOfDomainError (StructureEscapedError when ``escaped`` is set)
    with the offending point indices attached.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    inside = mesh.contains(pts)
    if not np.all(inside):
        bad = np.flatnonzero(~inside)
        msg = f"{len(bad)} point(s) outside the domain {mesh.domain}, first {pts[bad[0]].tolist()}"
        if escaped:
            raise StructureEscapedError(msg, points=bad)
        raise OutOfDomainError(msg, points=bad)
    x0, _, y0, _ = mesh.domain
    xi = np.clip((pts[:, 0] - x0) / mesh.dx, 0.0, mesh.nx)
    eta = np.clip((pts[:, 1] - y0) / mesh.dy, 0.0, mesh.ny)
    # ceil - 1 selects the lower cell on grid lines (lowest element index)
    ci = np.clip(np.ceil(xi).astype(np.int64) - 1, 0, mesh.nx - 1)
    cj = np.clip(np.ceil(eta).astype(np.int64) - 1, 0, mesh.ny - 1)
    a = xi - ci
    b = eta - cj
    lower = b <= a
    elem = 2 * (cj * mesh.nx + ci) + (~lower)
    bary = np.where(
        lower[:, None],
        np.column_stack([1.0 - a, a - b, b]),
        np.column_stack([1.0 - b, a, b - a]),
    )
    bary = np.clip(bary, 0.0, 1.0)
    bary /= bary.sum(axis=1, keepdims=True)
    return elem, bary


def locate_point(mesh, x):
    """Locate a single point; see :func:`locate_points`."""
    elem, bary = locate_points(mesh, np.asarray(x, dtype=float)[None, :])
    return PointLocation(int(elem[0]), tuple(float(c) for c in bary[0]))


def _perimeter(points):
    return float(np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1).sum())


def build_lagrangian_curve(center, radii, m):
    """Closed curve with ``m`` vertices on the ellipse with semi-axes ``radii``.

    Nodes are equally spaced in the ellipse angle and traversed
    counterclockwise. Reference coordinates are ``s_i = i * L / m`` where
    ``L`` is the perimeter of the initial polygon.
    """
    if int(m) != m or m < 3:
        raise InvalidArgumentError(f"a closed curve needs m >= 3 vertices, got {m}")
    a, b = (float(r) for r in radii)
    if a <= 0 or b <= 0:
        raise InvalidArgumentError(f"radii must be positive, got {radii}")
    m = int(m)
    theta = 2.0 * np.pi * np.arange(m) / m
    X0 = np.column_stack([center[0] + a * np.cos(theta), center[1] + b * np.sin(theta)])
    L = _perimeter(X0)
    s = np.arange(m) * (L / m)
    elements = np.column_stack([np.arange(m), (np.arange(m) + 1) % m])
    measures = np.full(m, L / m)
    return LagrangianMesh(
        codim=1, vertices=s, elements=elements, closed=True, X0=X0,
        measures=measures, edges=elements.copy(), h_s=L / m,
    )


def merge_curves(curves):
    """Union of several closed curves as one codim-1 mesh (used for multi-body runs)."""
    if not curves:
        raise InvalidArgumentError("no curves to merge")
    offset = 0
    elems, s, X0, meas = [], [], [], []
    s_shift = 0.0
    for c in curves:
        if c.codim != 1:
            raise InvalidArgumentError("only codim-1 curves can be merged")
        elems.append(c.elements + offset)
        s.append(c.vertices + s_shift)
        X0.append(c.X0)
        meas.append(c.measures)
        offset += c.M
        s_shift += c.measure
    elements = np.vstack(elems)
    return LagrangianMesh(
        codim=1, vertices=np.concatenate(s), elements=elements, closed=True,
        X0=np.vstack(X0), measures=np.concatenate(meas), edges=elements.copy(),
        h_s=max(c.h_s for c in curves), n_components=sum(c.n_components for c in curves),
    )


def _unique_edges(tris):
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e = np.sort(e, axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    return edges, edges[counts == 1]


def _orient(points, tris):
    p = points[tris]
    neg = _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]) < 0
    tris = tris.copy()
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _refine(points, tris, center, radii):
    edges, bnd = _unique_edges(tris)
    n = len(points)
    key = {tuple(e): n + k for k, e in enumerate(edges)}
    mids = 0.5 * (points[edges[:, 0]] + points[edges[:, 1]])
    on_bnd = np.zeros(len(edges), dtype=bool)
    bset = {tuple(e) for e in bnd}
    for k, e in enumerate(edges):
        on_bnd[k] = tuple(e) in bset
    # boundary midpoints are pulled back onto the ellipse
    d = (mids[on_bnd] - center) / radii
    mids[on_bnd] = center + radii * d / np.linalg.norm(d, axis=1)[:, None]
    new = []
    for t in tris:
        a, b, c = t
        ab = key[(min(a, b), max(a, b))]
        bc = key[(min(b, c), max(b, c))]
        ca = key[(min(c, a), max(c, a))]
        new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return np.vstack([points, mids]), np.array(new, dtype=np.int64)


def build_lagrangian_disc(center, radii, refinement=0, stretch=(1.0, 1.0)):
    """Triangulated ellipse (disc when the radii agree) for a thick body.

    Refinement 0 is a 24-triangle ring mesh (centre, 6 inner and 12 outer
    nodes); each refinement level splits every triangle into four, pulling
    new boundary nodes onto the ellipse. The reference configuration is the
    ellipse itself; the initial embedding is the affine stretch
    ``X0 = c + diag(stretch) (s - c)``.
    """
    if int(refinement) != refinement or refinement < 0:
        raise InvalidArgumentError(f"refinement must be a nonnegative integer, got {refinement}")
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (2,) or np.any(radii <= 0):
        raise InvalidArgumentError(f"radii must be two positive numbers, got {radii.tolist()}")
    stretch = np.asarray(stretch, dtype=float)
    if np.any(stretch <= 0):
        raise InvalidArgumentError("stretch factors must be positive")
    center = np.asarray(center, dtype=float)
    ang_in = 2.0 * np.pi * np.arange(6) / 6
    ang_out = 2.0 * np.pi * np.arange(12) / 12
    unit = np.vstack([
        [[0.0, 0.0]],
        0.5 * np.column_stack([np.cos(ang_in), np.sin(ang_in)]),
        np.column_stack([np.cos(ang_out), np.sin(ang_out)]),
    ])
    points = center + radii * unit
    tris = []
    for k in range(6):
        i0, i1 = 1 + k, 1 + (k + 1) % 6
        o0, o1, o2 = 7 + 2 * k, 7 + 2 * k + 1, 7 + (2 * k + 2) % 12
        tris += [(0, i0, i1), (i0, o0, o1), (i0, o1, i1), (i1, o1, o2)]
    tris = _orient(points, np.array(tris, dtype=np.int64))
    for _ in range(int(refinement)):
        points, tris = _refine(points, tris, center, radii)
    p = points[tris]
    areas = 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    edges, bnd = _unique_edges(tris)
    h_s = float(np.linalg.norm(points[edges[:, 0]] - points[edges[:, 1]], axis=1).max())
    X0 = center + stretch * (points - center)
    return LagrangianMesh(
        codim=0, vertices=points, elements=tris, closed=False, X0=X0,
        measures=areas, edges=edges, h_s=h_s, boundary_edges=bnd,
    )


def max_segment_length(solid):
    """Largest deformed edge length ``L^n`` of the solid mesh."""
    X = solid.X
    e = solid.mesh.edges
    if len(e) == 0:
        return 0.0
    return float(np.linalg.norm(X[e[:, 0]] - X[e[:, 1]], axis=1).max())


def solid_quadrature_points(mesh, X, n_points):
    """Mapped quadrature points, shape ``(M_e, q, 2)``, plus the reference rule."""
    rule = rule_with_points(mesh.element_kind, n_points)
    Xe = X[mesh.elements]
    if mesh.codim == 1:
        t = rule.points[:, 0]
        pts = (1.0 - t)[None, :, None] * Xe[:, None, 0] + t[None, :, None] * Xe[:, None, 1]
    else:
        r = rule.points
        lam = np.column_stack([1.0 - r[:, 0] - r[:, 1], r[:, 0], r[:, 1]])
        pts = np.einsum("qa,ead->eqd", lam, Xe)
    return pts, rule


def overlap_count(solid, fluid_mesh, n_points=None):
    """Maximum number of solid elements touching one Eulerian triangle (``C_e^n``).

    A solid element touches a fluid triangle when at least one of its mapped
    quadrature points is located there.
    """
    mesh = solid.mesh
    if n_points is None:
        n_points = 4 if mesh.codim == 1 else 7
    pts, _ = solid_quadrature_points(mesh, solid.X, n_points)
    elem, _ = locate_points(fluid_mesh, pts.reshape(-1, 2), escaped=True)
    owner = np.repeat(np.arange(mesh.M_e), pts.shape[1])
    pairs = np.unique(owner * fluid_mesh.n_triangles + elem)
    counts = np.bincount(pairs % fluid_mesh.n_triangles, minlength=fluid_mesh.n_triangles)
    return int(counts.max())
