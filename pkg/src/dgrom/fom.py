"""Symmetric interior penalty DG discretisation of steady Stokes flow.

Velocity test/trial functions are discontinuous P^D, pressure P^(D-1). The
discrete problem is the saddle system ``[[A, B], [B.T, 0]] [U; P] = [F1; F2]``
with

* ``A``: viscous volume term, facet penalty on interior and Dirichlet
  facets, and the consistency/symmetry terms ``-nu ({grad u}, [n x v])``;
* ``B``: ``-(q, div v)`` plus the facet coupling ``({q}, [n . v])``;
* ``F1``: source, Neumann traction, penalty and symmetry Dirichlet lifts;
* ``F2``: ``(q, n . u_D)`` on the Dirichlet boundary.

Every term is first built as a family of "resolved" blocks indexed by
subdomain and by a pair of coordinate directions ``(a, b)``. Direct assembly
on a given mesh contracts ``a == b``; the affine decomposition keeps the
blocks apart and weights them with map-dependent coefficients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dgspace import DGSpace
from .geometry import DIRICHLET, NEUMANN
from .mesh import FacetList

log = logging.getLogger(__name__)

A_TERMS = ("viscous", "consistency", "symmetry", "penalty")
B_TERMS = ("divergence", "pressure_jump")
F1_TERMS = ("source", "neumann", "penalty_lift", "symmetry_lift")
F2_TERMS = ("continuity_lift",)


class SolverError(RuntimeError):
    pass


def inflow_profile(x):
    """Parabolic inflow ``(y(1-y), 0)`` on ``x = 0``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    on_inlet = np.abs(x[..., 0]) < 1e-12
    y = x[..., 1]
    out[..., 0] = np.where(on_inlet, y * (1.0 - y), 0.0)
    return out


@dataclass(frozen=True)
class PhysicsConfig:
    """Material data, penalty and boundary data.

    ``source`` and ``traction`` are constant vectors; ``u_dirichlet`` maps
    (..., 2) points to (..., 2) velocities.
    """

    nu: float = 1.0
    c11: float = 100.0
    u_dirichlet: Callable = inflow_profile
    traction: tuple = (0.0, 0.0)
    source: tuple = (0.0, 0.0)
    nu_scaled_volume: bool = True

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.c11 > 0:
            raise ValueError(f"penalty C11 must be positive, got {self.c11}")


def default_c11(mesh, degree: int, factor: float = 10.0) -> float:
    return factor * degree**2 / mesh.h_min()


@dataclass
class StokesSystem:
    A: sp.csr_matrix
    B: sp.csr_matrix
    F1: np.ndarray
    F2: np.ndarray

    @property
    def n_u(self):
        return self.A.shape[0]

    @property
    def n_p(self):
        return self.B.shape[1]

    def matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.A, self.B], [self.B.T, None]], format="csc")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.F1, self.F2])


@dataclass
class InnerProducts:
    Mv: sp.csr_matrix
    Mp: sp.csr_matrix


# ----------------------------------------------------------------------------
# local tensors
# ----------------------------------------------------------------------------


@dataclass
class _Local:
    """Local contributions; ``data`` is (n, 2, 2, mi, mj) or (n, 2, mi, mj) etc."""

    test: np.ndarray
    trial: np.ndarray | None
    group: np.ndarray
    data: np.ndarray

    @staticmethod
    def cat(parts):
        return _Local(
            test=np.concatenate([p.test for p in parts]),
            trial=None if parts[0].trial is None else np.concatenate([p.trial for p in parts]),
            group=np.concatenate([p.group for p in parts]),
            data=np.concatenate([p.data for p in parts]),
        )


@dataclass
class _Traces:
    elem: np.ndarray
    v: np.ndarray
    gv: np.ndarray
    q: np.ndarray
    x: np.ndarray


def _traces(space: DGSpace, elem, endpoints) -> _Traces:
    s = space.vbasis.edge_rule.points
    a, b = endpoints[:, 0], endpoints[:, 1]
    X = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    xi = space.to_reference(elem[:, None], X)
    v, rg = space.vbasis.eval(xi)
    q, _ = space.pbasis.eval(xi)
    gv = space.physical_grads(elem[:, None], rg)
    return _Traces(elem=elem, v=v, gv=gv, q=q, x=X)


@dataclass
class _FacetData:
    sides: list
    normal: np.ndarray
    W: np.ndarray
    interior: bool


def _interior_data(space, facets: FacetList) -> _FacetData:
    p = space.mesh.p
    ends = p[facets.verts]
    plus = _traces(space, facets.plus, ends)
    minus = _traces(space, facets.minus, ends)
    W = space.vbasis.edge_rule.weights[None, :] * facets.length[:, None]
    return _FacetData([(plus, 1.0), (minus, -1.0)], facets.normal, W, True)


def _boundary_data(space, facets: FacetList, tag) -> _FacetData:
    mask = facets.boundary_mask(tag)
    ends = space.mesh.p[facets.b_verts[mask]]
    tr = _traces(space, facets.b_elem[mask], ends)
    W = space.vbasis.edge_rule.weights[None, :] * facets.b_length[mask][:, None]
    return _FacetData([(tr, 1.0)], facets.b_normal[mask], W, False)


def _pairs(fd: _FacetData):
    """Side pairs (sigma, rho) with the sign/average weight of the product."""
    if not fd.interior:
        (tr, _), = fd.sides
        yield tr, tr, 1.0, 1.0
        return
    for s_tr, s_sign in fd.sides:
        for r_tr, r_sign in fd.sides:
            yield s_tr, r_tr, s_sign, r_sign


def _volume_viscous(space) -> _Local:
    sub = space.mesh.subdomain
    W = np.abs(space.det)[:, None] * space.vbasis.rule.weights[None, :]
    g = space.physical_grads(np.arange(len(W))[:, None], space.vbasis.grads[None])
    data = np.einsum("eq,eqjA,eqiB->eABij", W, g, g)
    e = np.arange(len(W))
    return _Local(e, e, sub, data)


def _volume_divergence(space) -> _Local:
    sub = space.mesh.subdomain
    W = np.abs(space.det)[:, None] * space.vbasis.rule.weights[None, :]
    g = space.physical_grads(np.arange(len(W))[:, None], space.vbasis.grads[None])
    q = space.pbasis.vals
    data = -np.einsum("eq,eqia,qk->eaik", W, g, q)
    e = np.arange(len(W))
    return _Local(e, e, sub, data)


def _volume_mass(space, basis) -> _Local:
    W = np.abs(space.det)[:, None] * basis.rule.weights[None, :]
    data = np.einsum("eq,qj,qi->eij", W, basis.vals, basis.vals)[:, None, None]
    e = np.arange(len(W))
    return _Local(e, e, space.mesh.subdomain, data)


def _facet_consistency(space, fd: _FacetData) -> _Local:
    sub = space.mesh.subdomain
    parts = []
    for s_tr, r_tr, _, r_sign in _pairs(fd):
        w = 0.5 * r_sign if fd.interior else 1.0
        data = w * np.einsum("fq,fb,fqja,fqi->fabij", fd.W, fd.normal, s_tr.gv, r_tr.v)
        parts.append(_Local(r_tr.elem, s_tr.elem, sub[s_tr.elem], data))
    return _Local.cat(parts)


def _facet_penalty(space, fd: _FacetData) -> _Local:
    parts = []
    for s_tr, r_tr, s_sign, r_sign in _pairs(fd):
        data = (s_sign * r_sign) * np.einsum("fq,fqj,fqi->fij", fd.W, s_tr.v, r_tr.v)[:, None, None]
        parts.append(_Local(r_tr.elem, s_tr.elem, np.zeros(len(data), dtype=np.int64), data))
    return _Local.cat(parts)


def _facet_pressure_jump(space, fd: _FacetData) -> _Local:
    sub = space.mesh.subdomain
    plus_group = sub[fd.sides[0][0].elem]
    parts = []
    for s_tr, r_tr, _, r_sign in _pairs(fd):
        w = 0.5 * r_sign if fd.interior else 1.0
        data = w * np.einsum("fq,fb,fqk,fqi->fbik", fd.W, fd.normal, s_tr.q, r_tr.v)
        parts.append(_Local(r_tr.elem, s_tr.elem, plus_group, data))
    return _Local.cat(parts)


# ----------------------------------------------------------------------------
# scatter
# ----------------------------------------------------------------------------


def _scatter(rows, cols, local, shape):
    r = np.broadcast_to(rows[:, :, None], local.shape)
    c = np.broadcast_to(cols[:, None, :], local.shape)
    return sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()


def _vector_a(space, local, data2d, mask=None):
    """Componentwise velocity matrix from scalar local matrices."""
    dm = space.dofmap
    test, trial = local.test, local.trial
    if mask is not None:
        test, trial, data2d = test[mask], trial[mask], data2d[mask]
    M = None
    for c in range(2):
        part = _scatter(dm.vel[test, c], dm.vel[trial, c], data2d, (dm.n_u, dm.n_u))
        M = part if M is None else M + part
    return M


def _vector_b(space, local, data2d, comp, mask=None):
    dm = space.dofmap
    test, trial = local.test, local.trial
    if mask is not None:
        test, trial, data2d = test[mask], trial[mask], data2d[mask]
    return _scatter(dm.vel[test, comp], dm.pre[trial], data2d, (dm.n_u, dm.n_p))


def _resolve_a(space, local, resolve):
    """A-type blocks: key ``(s, a, b)``; contracted key ``None``."""
    if not resolve:
        if local.data.shape[1] == 1:
            return {None: _vector_a(space, local, local.data[:, 0, 0])}
        return {None: _vector_a(space, local, local.data[:, 0, 0] + local.data[:, 1, 1])}
    out = {}
    for s in np.unique(local.group):
        mask = local.group == s
        for a in range(local.data.shape[1]):
            for b in range(local.data.shape[2]):
                out[int(s), a, b] = _vector_a(space, local, local.data[:, a, b], mask)
    return out


def _resolve_b(space, local, resolve):
    """B-type blocks: key ``(s, a, c)`` for direction ``a`` on component ``c``."""
    if not resolve:
        M = _vector_b(space, local, local.data[:, 0], 0) + _vector_b(space, local, local.data[:, 1], 1)
        return {None: M}
    out = {}
    for s in np.unique(local.group):
        mask = local.group == s
        for a in range(2):
            for c in range(2):
                out[int(s), a, c] = _vector_b(space, local, local.data[:, a], c, mask)
    return out


# ----------------------------------------------------------------------------
# terms
# ----------------------------------------------------------------------------


def _skeleton(space, facets):
    return [_interior_data(space, facets), _boundary_data(space, facets, DIRICHLET)]


def matrix_terms(space: DGSpace, facets: FacetList, cfg: PhysicsConfig, resolve: bool = False) -> dict:
    """All operator terms as ``{term: {key: sparse}}``.

    Coefficients (``nu``, ``C11``, signs) are already included. With
    ``resolve=False`` each term has the single key ``None``.
    """
    nu_vol = cfg.nu if cfg.nu_scaled_volume else 1.0
    skel = _skeleton(space, facets)
    visc = _volume_viscous(space)
    visc.data *= nu_vol
    cons = _Local.cat([_facet_consistency(space, fd) for fd in skel])
    cons.data *= -cfg.nu
    pen = _Local.cat([_facet_penalty(space, fd) for fd in skel])
    pen.data *= cfg.c11
    terms = {
        "viscous": _resolve_a(space, visc, resolve),
        "consistency": _resolve_a(space, cons, resolve),
        "penalty": {None: _resolve_a(space, pen, False)[None]},
    }
    if resolve:
        # symmetry block (s, a, b) is the transpose of consistency block (s, b, a)
        terms["symmetry"] = {(s, a, b): terms["consistency"][s, b, a].T.tocsr() for (s, a, b) in terms["consistency"]}
    else:
        terms["symmetry"] = {None: terms["consistency"][None].T.tocsr()}
    div = _volume_divergence(space)
    pj = _Local.cat([_facet_pressure_jump(space, fd) for fd in skel])
    terms["divergence"] = _resolve_b(space, div, resolve)
    terms["pressure_jump"] = _resolve_b(space, pj, resolve)
    return terms


def _dirichlet_values(fd: _FacetData, cfg: PhysicsConfig):
    tr = fd.sides[0][0]
    return np.asarray(cfg.u_dirichlet(tr.x.reshape(-1, 2))).reshape(tr.x.shape)


def vector_terms(space: DGSpace, facets: FacetList, cfg: PhysicsConfig, resolve: bool = False) -> dict:
    """Right-hand side terms as ``{term: {key: ndarray}}``.

    Resolved keys: ``source`` -> ``(s,)``; ``neumann`` -> ``(s, da, db)`` with
    the domain boundary edge; ``symmetry_lift`` -> ``(s, a, b)``;
    ``continuity_lift`` -> ``(s, b, c)``; ``penalty_lift`` -> ``None``.
    """
    dm = space.dofmap
    sub = space.mesh.subdomain
    out = {}

    # source: int f . v
    W = np.abs(space.det)[:, None] * space.vbasis.rule.weights[None, :]
    loc = np.einsum("eq,qi->ei", W, space.vbasis.vals)
    f = np.asarray(cfg.source, dtype=float)
    out["source"] = _group_vec(dm.n_u, sub, resolve, lambda m: _vel_vec(dm, np.arange(len(W))[m], loc[m], f))

    # neumann: int t . v over Gamma_N
    t = np.asarray(cfg.traction, dtype=float)
    nm = facets.boundary_mask(NEUMANN)
    fdN = _boundary_data(space, facets, NEUMANN)
    trN = fdN.sides[0][0]
    locN = np.einsum("fq,fqi->fi", fdN.W, trN.v)
    keysN = [(int(sub[e]), int(d[0]), int(d[1])) for e, d in zip(trN.elem, facets.b_domain_edge[nm])]
    out["neumann"] = _group_vec(dm.n_u, keysN, resolve, lambda m: _vel_vec(dm, trN.elem[m], locN[m], t))

    fd = _boundary_data(space, facets, DIRICHLET)
    tr = fd.sides[0][0]
    uD = _dirichlet_values(fd, cfg)
    gsub = sub[tr.elem]

    # penalty lift: C11 int u_D . v
    vec = np.zeros(dm.n_u)
    for c in range(2):
        np.add.at(vec, dm.vel[tr.elem, c], cfg.c11 * np.einsum("fq,fq,fqi->fi", fd.W, uD[..., c], tr.v))
    out["penalty_lift"] = {None: vec}

    # symmetry lift: -nu int u_D,c n_b d_a v_c
    sym = -cfg.nu * np.einsum("fq,fb,fqc,fqia->fabci", fd.W, fd.normal, uD, tr.gv)
    # continuity lift: int q n_b u_D,c
    cont = np.einsum("fq,fb,fqc,fqk->fbck", fd.W, fd.normal, uD, tr.q)
    if not resolve:
        v1 = np.zeros(dm.n_u)
        v2 = np.zeros(dm.n_p)
        for c in range(2):
            np.add.at(v1, dm.vel[tr.elem, c], sym[:, 0, 0, c] + sym[:, 1, 1, c])
            np.add.at(v2, dm.pre[tr.elem], cont[:, c, c])
        out["symmetry_lift"] = {None: v1}
        out["continuity_lift"] = {None: v2}
        return out
    out["symmetry_lift"], out["continuity_lift"] = {}, {}
    for s in np.unique(gsub):
        m = gsub == s
        for a in range(2):
            for b in range(2):
                v1 = np.zeros(dm.n_u)
                for c in range(2):
                    np.add.at(v1, dm.vel[tr.elem[m], c], sym[m, a, b, c])
                out["symmetry_lift"][int(s), a, b] = v1
                v2 = np.zeros(dm.n_p)
                np.add.at(v2, dm.pre[tr.elem[m]], cont[m, a, b])
                out["continuity_lift"][int(s), a, b] = v2
    return out


def _vel_vec(dm, elems, loc, vec2):
    out = np.zeros(dm.n_u)
    for c in range(2):
        np.add.at(out, dm.vel[elems, c], vec2[c] * loc)
    return out


def _group_vec(n, groups, resolve, build):
    groups = np.asarray(groups) if len(groups) else np.zeros((0,), dtype=np.int64)
    if not resolve:
        return {None: build(np.ones(len(groups), dtype=bool)) if len(groups) else np.zeros(n)}
    out = {}
    if groups.ndim == 1:
        for s in np.unique(groups):
            out[(int(s),)] = build(groups == s)
    else:
        for key in sorted({tuple(int(v) for v in g) for g in groups}):
            out[key] = build(np.all(groups == np.array(key), axis=1))
    return out


def _total(blocks):
    it = iter(blocks.values())
    acc = next(it).copy()
    for M in it:
        acc = acc + M
    return acc


def assemble_terms(space, facets, cfg):
    """Direct (contracted) assembly of every term on the space's mesh."""
    mats = matrix_terms(space, facets, cfg)
    vecs = vector_terms(space, facets, cfg)
    return {name: blocks[None] for name, blocks in {**mats, **vecs}.items()}


def system_from_terms(terms, n_u, n_p) -> StokesSystem:
    A = sum((terms[t] for t in A_TERMS), sp.csr_matrix((n_u, n_u)))
    B = sum((terms[t] for t in B_TERMS), sp.csr_matrix((n_u, n_p)))
    F1 = sum((terms[t] for t in F1_TERMS), np.zeros(n_u))
    F2 = sum((terms[t] for t in F2_TERMS), np.zeros(n_p))
    return StokesSystem(A.tocsr(), B.tocsr(), F1, F2)


def assemble_aip(space, facets, cfg) -> sp.csr_matrix:
    mats = matrix_terms(space, facets, cfg)
    return sum((mats[t][None] for t in A_TERMS), sp.csr_matrix((space.n_u, space.n_u))).tocsr()


def assemble_b(space, facets, cfg=None) -> sp.csr_matrix:
    cfg = cfg or PhysicsConfig()
    mats = matrix_terms(space, facets, cfg)
    return (mats["divergence"][None] + mats["pressure_jump"][None]).tocsr()


def assemble_rhs(space, facets, cfg):
    vecs = vector_terms(space, facets, cfg)
    F1 = sum(vecs[t][None] for t in F1_TERMS)
    F2 = vecs["continuity_lift"][None]
    return F1, F2


def assemble_system(space, facets, cfg) -> StokesSystem:
    return system_from_terms(assemble_terms(space, facets, cfg), space.n_u, space.n_p)


def assemble_inner_products(space) -> InnerProducts:
    mv = _volume_mass(space, space.vbasis)
    visc = _volume_viscous(space)
    mv.data = mv.data + (visc.data[:, 0, 0] + visc.data[:, 1, 1])[:, None, None]
    Mv = _vector_a(space, mv, mv.data[:, 0, 0])
    mp = _volume_mass(space, space.pbasis)
    dm = space.dofmap
    Mp = _scatter(dm.pre[mp.test], dm.pre[mp.trial], mp.data[:, 0, 0], (dm.n_p, dm.n_p))
    return InnerProducts(Mv=Mv, Mp=Mp)


def solve_stokes(system: StokesSystem, rtol: float = 1e-10):
    """Sparse LU solve of the saddle system; returns ``(U, P)``."""
    K = system.matrix()
    rhs = system.rhs()
    if not np.any(rhs):
        return np.zeros(system.n_u), np.zeros(system.n_p)
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SolverError(
            f"saddle-point factorisation failed ({exc}); probable causes: C11 too small "
            "for coercivity or no Neumann boundary to fix the pressure level"
        ) from None
    sol = lu.solve(rhs)
    res = np.linalg.norm(K @ sol - rhs) / np.linalg.norm(rhs)
    if not np.all(np.isfinite(sol)) or res > rtol:
        raise SolverError(
            f"saddle-point solve inaccurate (relative residual {res:.3g}); probable causes: "
            "C11 too small or no Neumann boundary"
        )
    log.debug("stokes solve: n=%d residual=%.3g", K.shape[0], res)
    return sol[: system.n_u], sol[system.n_u:]
