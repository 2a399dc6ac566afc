import numpy as np
import pytest

from ibfem.fem import StokesPair
from ibfem.geometry import build_eulerian_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def unit_mesh8():
    return build_eulerian_mesh((0.0, 1.0, 0.0, 1.0), 8, 8)


@pytest.fixture(scope="session", params=["taylor_hood", "p1isop2_p0"])
def pair8(request, unit_mesh8):
    return StokesPair(unit_mesh8, request.param)


@pytest.fixture(scope="session")
def th8(unit_mesh8):
    return StokesPair(unit_mesh8, "taylor_hood")


def triangle_contains(p, tri, tol=1e-12):
    """Brute-force point-in-triangle test via signed areas (oracle)."""
    a, b, c = tri
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])
    d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    return min(d1, d2, d3) >= -tol


def brute_force_locate(mesh, p):
    for k, t in enumerate(mesh.triangles):
        if triangle_contains(p, mesh.vertices[t]):
            return k
    return None


def refined_solid_points(mesh, X, sub=10):
    """Brute-force quadrature on the solid: each element split ``sub`` ways.

    Segments get ``sub`` pieces with 8-point Gauss each; triangles are split
    into ``sub**2`` similar pieces with a degree-8 rule each. Returns
    ``(points, weights, lam, elem)`` where ``lam`` holds the solid P1
    barycentric weights of every point on its element ``elem``.
    """
    from ibfem.quadrature import quadrature_rule

    pts, wts, lams, owners = [], [], [], []
    if mesh.codim == 1:
        r = quadrature_rule("segment", 15)
        t0, w0 = r.points[:, 0], r.weights
        t = ((np.arange(sub)[:, None] + t0[None]) / sub).ravel()
        w = np.tile(w0, sub) / sub
        lam = np.column_stack([1 - t, t])
        for e, el in enumerate(mesh.elements):
            pts.append(lam @ X[el])
            wts.append(w * mesh.measures[e])
            lams.append(lam)
            owners.append(np.full(len(t), e))
    else:
        r = quadrature_rule("triangle", 8)
        sub_pts, sub_w = [], []
        for i in range(sub):
            for j in range(sub - i):
                for corners in (((i, j), (i + 1, j), (i, j + 1)),
                                ((i + 1, j), (i + 1, j + 1), (i, j + 1)) if i + j + 1 < sub else None):
                    if corners is None:
                        continue
                    c = np.array(corners, float) / sub
                    J = np.column_stack([c[1] - c[0], c[2] - c[0]])
                    sub_pts.append(c[0] + r.points @ J.T)
                    sub_w.append(r.weights * abs(np.linalg.det(J)))
        ref = np.vstack(sub_pts)
        w = np.concatenate(sub_w)
        lam = np.column_stack([1 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
        for e, el in enumerate(mesh.elements):
            pts.append(lam @ X[el])
            wts.append(2.0 * w * mesh.measures[e])
            lams.append(lam)
            owners.append(np.full(len(w), e))
    return np.vstack(pts), np.concatenate(wts), np.vstack(lams), np.concatenate(owners)


def brute_force_coupling(pair, mesh, X, sub=10):
    """Dense scalar ``L_f`` (M x n) and Gram ``int phi_i(X) phi_j(X)`` (n x n)."""
    p, w, lam, owner = refined_solid_points(mesh, X, sub)
    E = pair.evaluation(p).toarray()
    Z = np.zeros((len(p), mesh.M))
    for k in range(lam.shape[1]):
        np.add.at(Z, (np.arange(len(p)), mesh.elements[owner, k]), lam[:, k])
    return (Z * w[:, None]).T @ E, (E * w[:, None]).T @ E


def relative_entry_error(A, B):
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    return float(np.abs(A - B).max() / np.abs(B).max())
