import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ibfem.errors import ConfigurationError, DegenerateElementError
from ibfem.fem import (
    ElementSpace, StokesPair, build_dof_map, eval_basis, eval_basis_grad,
)
from ibfem.geometry import build_eulerian_mesh

CONTINUOUS = ["P1", "P2", "P1isoP2"]
ref_points = st.tuples(st.floats(0, 1), st.floats(0, 1)).filter(lambda p: p[0] + p[1] <= 1)


def test_p1_barycenter():
    assert np.allclose(eval_basis("P1", (1 / 3, 1 / 3)), 1 / 3, atol=1e-15)


@pytest.mark.parametrize("family", ["P2", "P1isoP2"])
def test_nodal_indicator(family):
    nodes = [(0, 0), (1, 0), (0, 1), (0.5, 0), (0.5, 0.5), (0, 0.5)]
    for k, x in enumerate(nodes):
        assert np.allclose(eval_basis(family, x), np.eye(6)[k], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(ref_points, st.sampled_from(CONTINUOUS))
def test_partition_of_unity(p, family):
    assert eval_basis(family, p).sum() == pytest.approx(1.0, abs=1e-14)
    J = np.array([[1.3, 0.2], [-0.4, 0.9]])
    assert np.abs(eval_basis_grad(family, p, J).sum(0)).max() < 1e-13


def test_p1_reference_gradients():
    g = eval_basis_grad("P1", (0.2, 0.3), np.eye(2))
    assert np.allclose(g, [[-1, -1], [1, 0], [0, 1]], atol=1e-15)


@pytest.mark.parametrize("family", ["P1", "P2"])
def test_gradient_finite_differences(family, rng):
    J = np.array([[0.7, 0.3], [0.1, 1.1]])
    x0 = np.array([0.1, 0.2])  # physical = x0 + J ref
    Jinv = np.linalg.inv(J)
    eps = 1e-6
    for _ in range(10):
        r = rng.dirichlet([1, 1, 1])[1:]
        g = eval_basis_grad(family, r, J)
        x = x0 + J @ r
        for d in range(2):
            e = np.zeros(2)
            e[d] = eps
            fp = eval_basis(family, Jinv @ (x + e - x0))
            fm = eval_basis(family, Jinv @ (x - e - x0))
            assert np.allclose((fp - fm) / (2 * eps), g[:, d], atol=1e-6)


def test_singular_jacobian():
    with pytest.raises(DegenerateElementError):
        eval_basis_grad("P1", (0.2, 0.2), np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_dof_counts():
    m = build_eulerian_mesh((0.0, 1.0, 0.0, 1.0), 2, 2)
    assert build_dof_map(m, ElementSpace("P1")).n_dofs == 9
    assert build_dof_map(m, ElementSpace("P2")).n_dofs == 25
    assert build_dof_map(m, ElementSpace("P0")).n_dofs == 8
    iso = build_dof_map(m, ElementSpace("P1isoP2"))
    assert iso.n_dofs == 25 and len(iso.fine_triangles) == 32


def test_p2_count_oracle():
    # vertices + unique edges, counted directly
    m = build_eulerian_mesh((0.0, 2.0, 0.0, 1.0), 5, 3)
    edges = {tuple(sorted((t[i], t[(i + 1) % 3]))) for t in m.triangles for i in range(3)}
    assert build_dof_map(m, ElementSpace("P2")).n_dofs == len(m.vertices) + len(edges)


def test_shared_edge_dofs_agree(unit_mesh8):
    dm = build_dof_map(unit_mesh8, ElementSpace("P2"))
    # every interior edge midpoint dof is referenced by exactly two elements
    counts = np.bincount(dm.element_to_dofs[:, 3:].ravel(), minlength=dm.n_dofs)
    nv = len(unit_mesh8.vertices)
    mid = counts[nv:]
    bnd = np.zeros(dm.n_dofs, bool)
    bnd[dm.boundary_dofs] = True
    assert np.all(mid[bnd[nv:]] == 1) and np.all(mid[~bnd[nv:]] == 2)


def _local_value(pair, t, u, x):
    tri = pair.mesh.vertices[pair.mesh.triangles[t]]
    J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    ref = np.linalg.solve(J, x - tri[0])
    return eval_basis(pair.velocity.space.family, ref) @ u[pair.velocity.element_to_dofs[t]]


@pytest.mark.parametrize("name", ["taylor_hood", "p1isop2_p0", "p2_p0"])
def test_linear_field_continuity(name, unit_mesh8):
    # global linear field evaluated from both sides of every interior edge
    pair = StokesPair(unit_mesh8, name)
    n = pair.n_velocity
    ux = pair.interpolate(lambda x, y: (2 * x - y + 0.3, x + 4 * y))[:n]
    owners = {}
    for t, tri in enumerate(unit_mesh8.triangles):
        for i in range(3):
            owners.setdefault(tuple(sorted((tri[i], tri[(i + 1) % 3]))), []).append(t)
    V = unit_mesh8.vertices
    checked = 0
    for (a, b), ts in owners.items():
        if len(ts) != 2:
            continue
        x = V[a] + 0.3 * (V[b] - V[a])
        v0, v1 = (_local_value(pair, t, ux, x) for t in ts)
        assert v0 == pytest.approx(v1, abs=1e-13)
        assert v0 == pytest.approx(2 * x[0] - x[1] + 0.3, abs=1e-13)
        checked += 1
    assert checked > 100


def test_unstable_pair_rejected(unit_mesh8):
    with pytest.raises(ConfigurationError):
        StokesPair.from_families(unit_mesh8, "P1", "P1")
    with pytest.raises(ConfigurationError):
        StokesPair(unit_mesh8, "p1_p1")
    assert StokesPair.from_families(unit_mesh8, "P2", "P1").name == "taylor_hood"
