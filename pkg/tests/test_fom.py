import numpy as np
import pytest
import scipy.sparse as sp
import sympy as sym

from conftest import X, Y, as_scalar_func, as_vector_func, random_poly, segment_integral, triangle_integral
from dgrom.dgspace import DGSpace
from dgrom.fom import (
    PhysicsConfig, SolverError, StokesSystem, assemble_aip, assemble_b, assemble_inner_products, assemble_rhs,
    assemble_system, matrix_terms, solve_stokes,
)
from dgrom.geometry import NEUMANN
from dgrom.mesh import build_facets, single_triangle_mesh

TRI = ((0.1, 0.2), (1.3, 0.4), (0.5, 1.1))
NU, C11 = 0.7, 13.0


def grad(e):
    return sym.Matrix([sym.diff(e, X), sym.diff(e, Y)])


def edges(tri):
    return [(tri[k], tri[(k + 1) % 3]) for k in range(3)]


@pytest.fixture(scope="module")
def single():
    mesh, domain = single_triangle_mesh(TRI)
    return DGSpace(mesh, 2), build_facets(mesh, domain)


@pytest.fixture(scope="module")
def fields():
    rng = np.random.default_rng(7)
    u = [random_poly(rng, 2) for _ in range(2)]
    v = [random_poly(rng, 2) for _ in range(2)]
    w = [random_poly(rng, 2) for _ in range(2)]
    q = random_poly(rng, 1)
    return u, v, w, q


def boundary(f):
    return sum(segment_integral(f, a, b) for a, b in edges(TRI))


def test_interior_penalty_form_matches_exact_integrals(single, fields):
    space, facets = single
    u, v, _, _ = fields
    cfg = PhysicsConfig(nu=NU, c11=C11)
    U, V = space.interpolate_velocity(as_vector_func(u)), space.interpolate_velocity(as_vector_func(v))
    gu, gv = [grad(c) for c in u], [grad(c) for c in v]
    vol = triangle_integral(sum(gu[c].dot(gv[c]) for c in range(2)), TRI)
    pen = boundary(lambda nx, ny: u[0] * v[0] + u[1] * v[1])
    cons = boundary(lambda nx, ny: sum((gu[c][0] * nx + gu[c][1] * ny) * v[c] for c in range(2)))
    symm = boundary(lambda nx, ny: sum((gv[c][0] * nx + gv[c][1] * ny) * u[c] for c in range(2)))
    terms = {k: blocks[None] for k, blocks in matrix_terms(space, facets, cfg).items()}
    assert V @ terms["viscous"] @ U == pytest.approx(NU * vol, rel=1e-12)
    assert V @ terms["penalty"] @ U == pytest.approx(C11 * pen, rel=1e-12)
    assert V @ terms["consistency"] @ U == pytest.approx(-NU * cons, rel=1e-12)
    assert V @ terms["symmetry"] @ U == pytest.approx(-NU * symm, rel=1e-12)
    A = assemble_aip(space, facets, cfg)
    assert V @ A @ U == pytest.approx(NU * (vol - cons - symm) + C11 * pen, rel=1e-12)


def test_viscous_volume_term_can_be_unscaled(single, fields):
    space, facets = single
    u, _, _, _ = fields
    U = space.interpolate_velocity(as_vector_func(u))
    a = matrix_terms(space, facets, PhysicsConfig(nu=NU, c11=C11, nu_scaled_volume=False))["viscous"][None]
    b = matrix_terms(space, facets, PhysicsConfig(nu=NU, c11=C11))["viscous"][None]
    assert U @ a @ U == pytest.approx(U @ b @ U / NU, rel=1e-13)


def test_pressure_velocity_coupling_matches_exact_integrals(single, fields):
    space, facets = single
    _, v, _, q = fields
    V = space.interpolate_velocity(as_vector_func(v))
    Q = space.interpolate_pressure(as_scalar_func(q))
    div = sym.diff(v[0], X) + sym.diff(v[1], Y)
    exact = -triangle_integral(q * div, TRI) + boundary(lambda nx, ny: q * (v[0] * nx + v[1] * ny))
    assert V @ assemble_b(space, facets) @ Q == pytest.approx(exact, rel=1e-12)


def test_right_hand_side_matches_exact_integrals(single, fields):
    space, facets = single
    _, v, w, q = fields
    f = (0.3, -1.2)
    cfg = PhysicsConfig(nu=NU, c11=C11, u_dirichlet=as_vector_func(w), source=f)
    F1, F2 = assemble_rhs(space, facets, cfg)
    V = space.interpolate_velocity(as_vector_func(v))
    Q = space.interpolate_pressure(as_scalar_func(q))
    gv = [grad(c) for c in v]
    src = triangle_integral(f[0] * v[0] + f[1] * v[1], TRI)
    lift = boundary(lambda nx, ny: w[0] * v[0] + w[1] * v[1])
    symm = boundary(lambda nx, ny: sum((gv[c][0] * nx + gv[c][1] * ny) * w[c] for c in range(2)))
    assert F1 @ V == pytest.approx(src + C11 * lift - NU * symm, rel=1e-12)
    assert F2 @ Q == pytest.approx(boundary(lambda nx, ny: q * (w[0] * nx + w[1] * ny)), rel=1e-12)


def test_inner_products_match_exact_integrals(single, fields):
    space, _ = single
    u, _, _, q = fields
    ip = assemble_inner_products(space)
    U = space.interpolate_velocity(as_vector_func(u))
    Q = space.interpolate_pressure(as_scalar_func(q))
    exact_v = triangle_integral(sum(c**2 + grad(c).dot(grad(c)) for c in u), TRI)
    assert U @ ip.Mv @ U == pytest.approx(exact_v, rel=1e-12)
    assert Q @ ip.Mp @ Q == pytest.approx(triangle_integral(q**2, TRI), rel=1e-12)


def test_operator_structure(coarse):
    A = assemble_aip(coarse.space, coarse.facets, coarse.physics)
    B = assemble_b(coarse.space, coarse.facets)
    assert A.shape == (coarse.space.n_u,) * 2 and B.shape == (coarse.space.n_u, coarse.space.n_p)
    assert sp.linalg.norm(A - A.T) <= 1e-13 * sp.linalg.norm(A)
    assert np.linalg.eigvalsh(A.toarray()).min() > 0


def test_broken_integration_by_parts(coarse):
    # for a continuous quadratic u: volume term plus facet fluxes equals -int lap(u) . phi_i
    space, facets = coarse.space, coarse.facets
    cfg = PhysicsConfig(nu=1.0, c11=1.0)
    u = (X**2 - 2 * X * Y + 3 * Y**2, X * Y - Y**2)
    lap = [float(sym.diff(c, X, 2) + sym.diff(c, Y, 2)) for c in u]
    terms = matrix_terms(space, facets, cfg)
    U = space.interpolate_velocity(as_vector_func(u))
    lhs = (terms["viscous"][None] + terms["consistency"][None]) @ U
    # the Neumann side (x = 1, n = (1, 0)) carries no consistency flux in the operator
    lhs -= _neumann_flux(space, facets, as_vector_func([sym.diff(c, X) for c in u]))
    l2 = assemble_inner_products(space).Mv - terms["viscous"][None]
    phi_int = l2 @ space.interpolate_velocity(lambda p: np.ones_like(p))
    lap_vec = np.zeros(space.n_u)
    for c in range(2):
        lap_vec[space.dofmap.vel[:, c]] = lap[c]
    np.testing.assert_allclose(lhs, -lap_vec * phi_int, atol=1e-12)


def _neumann_flux(space, facets, g):
    """int over Neumann facets of g . phi_i (componentwise), by an independent 1D Gauss rule."""
    out = np.zeros(space.n_u)
    xg, wg = np.polynomial.legendre.leggauss(6)
    t, wg = 0.5 * (xg + 1), 0.5 * wg
    for k in np.flatnonzero(facets.boundary_mask(NEUMANN)):
        e = facets.b_elem[k]
        a, b = space.mesh.p[facets.b_verts[k]]
        pts = a + t[:, None] * (b - a)
        phi, _ = space.vbasis.eval(space.to_reference(e, pts))
        gv = g(pts)
        for c in range(2):
            out[space.dofmap.vel[e, c]] += facets.b_length[k] * (wg * gv[:, c]) @ phi
    return out


def test_divergence_of_constant_pressure_is_outflow(coarse):
    # (q = 1): sum over elements and interior facets leaves -int_{Gamma_N} n . u
    space, facets = coarse.space, coarse.facets
    B = assemble_b(space, facets)
    U = space.interpolate_velocity(as_vector_func((X * Y + 1, X**2 - Y)))
    outflow = float(sym.integrate((X * Y + 1).subs(X, 1), (Y, 0, 1)))
    assert U @ (B @ np.ones(space.n_p)) == pytest.approx(-outflow, rel=1e-12)


def test_inflow_lift_balances_outflow(prob):
    # discrete continuity gives sum(F2) = int_{Gamma_D} n . u_D = -1/6 for the parabolic inflow
    _, F2 = assemble_rhs(prob.space, prob.facets, prob.physics)
    assert F2.sum() == pytest.approx(-1.0 / 6.0, rel=1e-13)


def test_solution_conserves_mass(prob):
    U, P = solve_stokes(assemble_system(prob.space, prob.facets, prob.physics))
    B = assemble_b(prob.space, prob.facets)
    # outflow through x = 1 equals inflow 1/6
    assert -(U @ (B @ np.ones(prob.space.n_p))) == pytest.approx(1.0 / 6.0, rel=1e-9)
    assert np.all(np.isfinite(P))


def test_zero_data_gives_zero_solution(single):
    space, facets = single
    n_u, n_p = space.n_u, space.n_p
    system = StokesSystem(sp.identity(n_u, format="csr"), sp.csr_matrix((n_u, n_p)), np.zeros(n_u), np.zeros(n_p))
    U, P = solve_stokes(system)
    assert not U.any() and not P.any()


def test_singular_system_is_reported(single):
    # all-Dirichlet boundary leaves the pressure level free; data with net flux is incompatible
    space, facets = single
    cfg = PhysicsConfig(c11=100.0, u_dirichlet=as_vector_func((X, Y)))
    with pytest.raises(SolverError, match="C11|Neumann"):
        solve_stokes(assemble_system(space, facets, cfg))


@pytest.mark.parametrize("kw", [{"nu": 0.0}, {"c11": -1.0}])
def test_physics_validation(kw):
    with pytest.raises(ValueError):
        PhysicsConfig(**kw)
