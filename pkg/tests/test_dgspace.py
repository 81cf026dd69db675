import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgrom.dgspace import BasisSet, DGSpace, build_dofmap, evaluate_field, lagrange_nodes, reference_basis
from dgrom.geometry import build_reference_domain
from dgrom.mesh import generate_mesh


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_nodal_basis_is_kronecker(degree):
    basis = reference_basis(degree)
    nodes = lagrange_nodes(degree)
    assert len(nodes) == (degree + 1) * (degree + 2) // 2
    vals, _ = basis.eval(nodes)
    np.testing.assert_allclose(vals, np.eye(len(nodes)), atol=1e-13)
    np.testing.assert_allclose(nodes[:3], [[0, 0], [1, 0], [0, 1]])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_partition_of_unity(xy):
    x, y = xy[0], xy[1] * (1 - xy[0])
    for degree in (1, 2):
        vals, grads = reference_basis(degree).eval(np.array([x, y]))
        assert vals.sum() == pytest.approx(1.0, abs=1e-13)
        np.testing.assert_allclose(grads.sum(0), 0.0, atol=1e-12)


def test_gradients_match_finite_differences():
    basis = reference_basis(2)
    x, h = np.array([0.23, 0.41]), 1e-6
    _, g = basis.eval(x)
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (basis.eval(x + e)[0] - basis.eval(x - e)[0]) / (2 * h)
        np.testing.assert_allclose(g[:, d], fd, atol=1e-8)


def test_edge_tables_follow_edge_orientation():
    basis = reference_basis(2)
    vals, _ = basis.eval(basis.edge_points[0])
    np.testing.assert_allclose(basis.edge_vals[0], vals)
    # edge k runs from vertex k to vertex k + 1
    np.testing.assert_allclose(basis.edge_points[1][:, 0] + basis.edge_points[1][:, 1], 1.0)


def test_degree_errors():
    with pytest.raises(ValueError):
        BasisSet(0)
    mesh = generate_mesh(build_reference_domain())
    with pytest.raises(ValueError):
        build_dofmap(mesh, 1)


@pytest.fixture(scope="module")
def space():
    return DGSpace(generate_mesh(build_reference_domain(), 1, mu=(0.45, 0.25)), 2)


def test_dof_counts(space):
    nel = space.mesh.n_elements
    assert (space.n_u, space.n_p) == (12 * nel, 3 * nel)
    dm = space.dofmap
    assert np.array_equal(np.sort(np.concatenate([dm.vel.ravel()])), np.arange(space.n_u))
    assert np.array_equal(np.sort(dm.pre.ravel()), np.arange(space.n_p))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_quadratics_reproduced_exactly(space, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(2, 6))

    def f(p):
        x, y = p[..., 0], p[..., 1]
        mono = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], -1)
        return mono @ c.T

    U = space.interpolate_velocity(f)
    e = rng.integers(space.mesh.n_elements)
    lam = rng.dirichlet(np.ones(3))
    point = lam @ space.mesh.element_coords()[e]
    np.testing.assert_allclose(evaluate_field(U, space, point), f(point), atol=1e-12)
    P = space.interpolate_pressure(lambda p: 1 + 2 * p[..., 0] - p[..., 1])
    assert evaluate_field(P, space, point, "pressure") == pytest.approx(1 + 2 * point[0] - point[1], abs=1e-12)


def test_reference_and_physical_maps_are_inverse(space):
    xi = np.array([0.2, 0.3])
    for e in (0, 5, space.mesh.n_elements - 1):
        np.testing.assert_allclose(space.to_reference(e, space.to_physical(e, xi)), xi, atol=1e-13)


def test_locate_uses_lowest_index_on_shared_edges(space):
    p = space.mesh.element_coords()
    shared = 0.5 * (p[0, 1] + p[0, 2])
    assert space.locate(shared) == 0
    with pytest.raises(ValueError):
        space.locate((2.0, 2.0))


def test_vertex_values_gather(space):
    U = space.interpolate_velocity(lambda p: np.stack([p[..., 0], p[..., 1] ** 2], -1))
    P = space.interpolate_pressure(lambda p: p[..., 0] + p[..., 1])
    uv, pv = space.vertex_values(U, P)
    xy = space.mesh.element_coords()
    np.testing.assert_allclose(uv[..., 0], xy[..., 0], atol=1e-14)
    np.testing.assert_allclose(uv[..., 1], xy[..., 1] ** 2, atol=1e-14)
    np.testing.assert_allclose(pv, xy.sum(-1), atol=1e-14)
