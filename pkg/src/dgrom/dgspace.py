"""Broken Lagrange spaces: P^D vector velocity and P^(D-1) scalar pressure."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .quadrature import QuadratureRule, gauss_interval, triangle_rule

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def lagrange_nodes(degree: int) -> np.ndarray:
    """Equispaced nodes ordered vertices, edge interiors (edge k = v_k -> v_k+1), interior."""
    D = degree
    nodes = [tuple(v) for v in REF_VERTICES]
    for k in range(3):
        a, b = REF_VERTICES[k], REF_VERTICES[(k + 1) % 3]
        nodes += [tuple(a + (s / D) * (b - a)) for s in range(1, D)]
    for j in range(1, D):
        for i in range(1, D - j):
            nodes.append((i / D, j / D))
    return np.array(nodes)


def _exponents(degree):
    return [(a, n - a) for n in range(degree + 1) for a in range(n, -1, -1)]


class BasisSet:
    """Nodal Lagrange basis of degree ``degree`` on the reference triangle.

    Values and gradients are tabulated at the volume quadrature points
    (``vals``, ``grads``) and at the Gauss points of each local edge
    (``edge_vals[k]``, ``edge_grads[k]``).
    """

    def __init__(self, degree: int, volume_rule: QuadratureRule | None = None, n_edge_points: int | None = None):
        if degree < 1:
            raise ValueError(f"polynomial degree must be >= 1, got {degree}")
        self.degree = degree
        self.nodes = lagrange_nodes(degree)
        self.m = len(self.nodes)
        self._exp = _exponents(degree)
        V = self._monomials(self.nodes)
        self._coef = np.linalg.inv(V)
        self.rule = volume_rule or triangle_rule(2 * degree)
        self.edge_rule = gauss_interval(n_edge_points or degree + 1)
        self.vals, self.grads = self.eval(self.rule.points)
        self.edge_points = []
        self.edge_vals, self.edge_grads = [], []
        s = self.edge_rule.points
        for k in range(3):
            a, b = REF_VERTICES[k], REF_VERTICES[(k + 1) % 3]
            pts = a + s[:, None] * (b - a)
            v, g = self.eval(pts)
            self.edge_points.append(pts)
            self.edge_vals.append(v)
            self.edge_grads.append(g)

    def _monomials(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0] ** a * x[..., 1] ** b for a, b in self._exp], axis=-1)

    def _monomial_grads(self, x):
        x = np.asarray(x, dtype=float)
        X, Y = x[..., 0], x[..., 1]
        dx = [a * X ** max(a - 1, 0) * Y**b if a else np.zeros_like(X) for a, b in self._exp]
        dy = [b * X**a * Y ** max(b - 1, 0) if b else np.zeros_like(X) for a, b in self._exp]
        return np.stack([np.stack(dx, -1), np.stack(dy, -1)], axis=-1)

    def eval(self, x):
        """Basis values (..., m) and reference gradients (..., m, 2) at points x."""
        vals = self._monomials(x) @ self._coef
        g = self._monomial_grads(x)
        grads = np.einsum("...ka,ki->...ia", g, self._coef)
        return vals, grads


def reference_basis(degree: int) -> BasisSet:
    return BasisSet(degree)


@dataclass(frozen=True)
class DofMap:
    """Fully discontinuous numbering; each element owns a contiguous range.

    ``vel[e, c, i]`` is the global index of local node ``i`` of velocity
    component ``c`` on element ``e``; ``pre[e, i]`` likewise for pressure.
    """

    n_u: int
    n_p: int
    vel: np.ndarray
    pre: np.ndarray


def build_dofmap(mesh: Mesh, degree: int) -> DofMap:
    if degree < 2:
        raise ValueError("velocity degree must be >= 2")
    mu = (degree + 1) * (degree + 2) // 2
    mp = degree * (degree + 1) // 2
    nel = mesh.n_elements
    vel = np.arange(2 * mu * nel).reshape(nel, 2, mu)
    pre = np.arange(mp * nel).reshape(nel, mp)
    return DofMap(n_u=2 * mu * nel, n_p=mp * nel, vel=vel, pre=pre)


class DGSpace:
    """Velocity/pressure pair on a mesh with per-element affine geometry."""

    def __init__(self, mesh: Mesh, degree: int = 2):
        self.mesh = mesh
        self.degree = degree
        self.vbasis = BasisSet(degree)
        self.pbasis = BasisSet(degree - 1, volume_rule=self.vbasis.rule, n_edge_points=degree + 1)
        self.dofmap = build_dofmap(mesh, degree)
        x = mesh.element_coords()
        self.x0 = x[:, 0]
        # columns are the images of the reference edge vectors
        self.jac = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=-1)
        self.det = self.jac[:, 0, 0] * self.jac[:, 1, 1] - self.jac[:, 0, 1] * self.jac[:, 1, 0]
        self.jinv = np.linalg.inv(self.jac)

    @property
    def n_u(self):
        return self.dofmap.n_u

    @property
    def n_p(self):
        return self.dofmap.n_p

    def to_reference(self, e, x):
        """Reference-triangle coordinates of physical points x on element(s) e."""
        return np.einsum("...ab,...b->...a", self.jinv[e], np.asarray(x) - self.x0[e])

    def to_physical(self, e, xi):
        return np.einsum("...ab,...b->...a", self.jac[e], np.asarray(xi)) + self.x0[e]

    def physical_grads(self, e, ref_grads):
        """Map reference gradients (..., m, 2) with the inverse-transpose Jacobian."""
        return np.einsum("...ia,...ab->...ib", ref_grads, self.jinv[e])

    def locate(self, point, tol=1e-12) -> int:
        """Lowest-index element containing ``point`` (plus-side convention)."""
        xi = np.einsum("eab,eb->ea", self.jinv, np.asarray(point, dtype=float) - self.x0)
        lam = np.column_stack([1 - xi.sum(1), xi])
        inside = np.flatnonzero(lam.min(1) >= -tol)
        if inside.size == 0:
            raise ValueError(f"point {tuple(point)} lies outside the mesh")
        return int(inside[0])

    def velocity_nodes(self):
        """(Nel, m, 2) physical coordinates of the velocity Lagrange nodes."""
        return self.to_physical(np.arange(self.mesh.n_elements)[:, None], self.vbasis.nodes[None])

    def pressure_nodes(self):
        return self.to_physical(np.arange(self.mesh.n_elements)[:, None], self.pbasis.nodes[None])

    def interpolate_velocity(self, func) -> np.ndarray:
        x = self.velocity_nodes()
        vals = np.asarray(func(x.reshape(-1, 2))).reshape(x.shape)
        U = np.zeros(self.n_u)
        U[self.dofmap.vel[:, 0]] = vals[..., 0]
        U[self.dofmap.vel[:, 1]] = vals[..., 1]
        return U

    def interpolate_pressure(self, func) -> np.ndarray:
        x = self.pressure_nodes()
        P = np.zeros(self.n_p)
        P[self.dofmap.pre] = np.asarray(func(x.reshape(-1, 2))).reshape(x.shape[:2])
        return P

    def vertex_values(self, U=None, P=None):
        """Per-element vertex values: velocity (Nel, 3, 2) and pressure (Nel, 3).

        Nodal bases list the three vertices first, so this is a gather.
        """
        out = []
        if U is not None:
            out.append(np.stack([U[self.dofmap.vel[:, 0, :3]], U[self.dofmap.vel[:, 1, :3]]], axis=-1))
        if P is not None:
            out.append(P[self.dofmap.pre[:, :3]])
        return out[0] if len(out) == 1 else tuple(out)


def evaluate_field(coeffs, space: DGSpace, point, field: str = "velocity"):
    """Value of a discrete field at ``point``; interfaces use the plus-side trace."""
    e = space.locate(point)
    xi = space.to_reference(e, point)
    if field == "velocity":
        phi, _ = space.vbasis.eval(xi)
        c = np.asarray(coeffs)[space.dofmap.vel[e]]
        return c @ phi
    if field == "pressure":
        phi, _ = space.pbasis.eval(xi)
        return float(np.asarray(coeffs)[space.dofmap.pre[e]] @ phi)
    raise ValueError(f"unknown field {field!r}")
