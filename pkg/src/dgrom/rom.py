"""Snapshot POD and Galerkin projection of the affine DG system."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .affine import AffineOperator, assemble_online
from .fom import InnerProducts, SolverError, solve_stokes
from .geometry import DomainDescription, build_maps
from .online import ReducedModel, ReducedSolution

log = logging.getLogger(__name__)

DROP_TOL = 1e-14


class PodError(ValueError):
    pass


def sample_parameters(box, n: int, seed: int) -> np.ndarray:
    """``n`` uniform samples in ``box`` from numpy's PCG64 generator.

    Points are drawn as consecutive ``(x, y)`` pairs, so the first ``m``
    rows do not depend on ``n``; training and test sets are taken as
    consecutive slices of one stream.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    (x0, x1), (y0, y1) = box
    u = rng.random((n, 2))
    return np.column_stack([x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]])


@dataclass
class SnapshotSet:
    Sv: np.ndarray
    Sp: np.ndarray
    params: np.ndarray

    @property
    def n_s(self):
        return self.Sv.shape[1]

    def __post_init__(self):
        if self.Sv.shape[1] != len(self.params) or self.Sp.shape[1] != len(self.params):
            raise ValueError("snapshot columns do not match the parameter list")
        if not (np.all(np.isfinite(self.Sv)) and np.all(np.isfinite(self.Sp))):
            raise ValueError("snapshots contain non-finite entries")


def fom_solve(op: AffineOperator, domain: DomainDescription, mu):
    system = assemble_online(op, op.theta(build_maps(domain, mu)))
    return solve_stokes(system)


def collect_snapshots(op: AffineOperator, domain: DomainDescription, params) -> SnapshotSet:
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if len(params) < 1:
        raise ValueError("need at least one snapshot parameter")
    Sv = np.empty((op.n_u, len(params)))
    Sp = np.empty((op.n_p, len(params)))
    for j, mu in enumerate(params):
        try:
            Sv[:, j], Sp[:, j] = fom_solve(op, domain, mu)
        except SolverError as exc:
            raise SolverError(f"snapshot solve failed at mu=({mu[0]}, {mu[1]}): {exc}") from None
        log.debug("snapshot %d at mu=(%.4f, %.4f)", j, *mu)
    return SnapshotSet(Sv, Sp, params)


@dataclass
class PodBasis:
    """``B = S V Theta^{-1/2}`` restricted to the first ``n`` modes."""

    B: np.ndarray
    eigenvalues: np.ndarray
    rank: int

    @property
    def n(self):
        return self.B.shape[1]


def inner_product_factor(M) -> sp.csr_matrix:
    """Sparse ``R`` with ``R^T R = M`` for a symmetric positive definite ``M``.

    DG inner products couple only the unknowns of one element, so ``M``
    splits into small diagonal blocks (the connected components of its
    sparsity graph), each factorised densely.
    """
    M = sp.csr_matrix(M)
    n_comp, label = connected_components(M, directed=False)
    order = np.argsort(label, kind="stable")
    bounds = np.searchsorted(label[order], np.arange(n_comp + 1))
    rows, cols, vals = [], [], []
    for c in range(n_comp):
        idx = order[bounds[c]:bounds[c + 1]]
        block = M[idx][:, idx].toarray()
        try:
            R = np.linalg.cholesky(0.5 * (block + block.T)).T
        except np.linalg.LinAlgError:
            raise PodError("inner-product matrix is not positive definite") from None
        r, k = np.nonzero(R)
        rows.append(idx[r])
        cols.append(idx[k])
        vals.append(R[r, k])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=M.shape)


def pod_eigen(S, M):
    """Sorted eigenpairs of the weighted Gram matrix ``S^T M S``.

    Computed as squared singular values of ``R S`` (``M = R^T R``) rather
    than by forming the Gram matrix: the rounding error in ``theta_i`` then
    scales with ``sqrt(theta_1 theta_i)`` instead of ``theta_1``.
    """
    _, sigma, Vt = np.linalg.svd(inner_product_factor(M) @ S, full_matrices=False)
    return sigma**2, Vt.T


def pod(S, M, n: int | None = None, tol: float = DROP_TOL) -> PodBasis:
    """POD basis of the columns of ``S`` in the inner product ``M``.

    ``n=None`` keeps the numerical rank, i.e. all eigenvalues above
    ``tol * theta_1``.
    """
    if not np.any(S):
        raise PodError("snapshot matrix is zero")
    w, V = pod_eigen(S, M)
    rank = int(np.count_nonzero(w > tol * w[0]))
    n = rank if n is None else n
    if n < 1 or n > rank:
        raise PodError(f"requested {n} modes but the usable maximum (numerical rank) is {rank}")
    B = S @ (V[:, :n] / np.sqrt(w[:n]))
    return PodBasis(B=_reorthonormalize(B, M), eigenvalues=w, rank=rank)


def _reorthonormalize(B, M, tol=1e-12, passes=2):
    """Cholesky QR in the ``M`` inner product.

    Modes built from small eigenvalues lose orthogonality in proportion to
    ``eps * theta_1 / theta_n``. The triangular factor keeps the span of
    every leading group of columns, so projections onto the first ``N``
    modes are unchanged.
    """
    for _ in range(passes):
        G = B.T @ (M @ B)
        if np.abs(G - np.eye(len(G))).max() <= tol:
            break
        R = np.linalg.cholesky(0.5 * (G + G.T)).T
        B = sla.solve_triangular(R, B.T, trans="T").T
    return B


def velocity_pod(Sv, Mv, dofmap, mode: str = "componentwise", n: int | None = None,
                 tol: float = DROP_TOL) -> list[PodBasis]:
    """Velocity POD bases embedded in the full velocity space.

    ``"joint"`` decomposes the whole velocity snapshot matrix with ``M_v``;
    ``"componentwise"`` decomposes each component separately with the
    matching diagonal block of ``M_v`` (which has no cross-component
    coupling) and returns one basis per component.
    """
    if mode == "joint":
        return [pod(Sv, Mv, n, tol)]
    if mode != "componentwise":
        raise ValueError(f"unknown velocity POD mode {mode!r}")
    Mv = Mv.tocsr()
    bases = []
    for c in range(2):
        rows = dofmap.vel[:, c].ravel()
        b = pod(Sv[rows], Mv[rows][:, rows], n, tol)
        full = np.zeros((Sv.shape[0], b.n))
        full[rows] = b.B
        bases.append(PodBasis(B=full, eigenvalues=b.eigenvalues, rank=b.rank))
    return bases


def project(op: AffineOperator, domain: DomainDescription, bases_v, basis_p: PodBasis,
            extras=None) -> ReducedModel:
    """Galerkin-project every affine block once (offline)."""
    if isinstance(bases_v, PodBasis):
        bases_v = [bases_v]
    Bv = np.hstack([b.B for b in bases_v])
    Bp = basis_p.B
    idx = {name: op.indices(operator=name) for name in ("A", "B", "F1", "F2")}

    def stack(name, f, shape):
        if len(idx[name]) == 0:
            return np.zeros((0,) + shape)
        return np.stack([f(op.blocks[q]) for q in idx[name]])

    nv, np_ = Bv.shape[1], Bp.shape[1]
    return ReducedModel(
        domain=domain,
        recipes=op.recipes,
        alpha_scaling=op.alpha_scaling,
        idx=idx,
        Ar=stack("A", lambda M: Bv.T @ (M @ Bv), (nv, nv)),
        Br=stack("B", lambda M: Bv.T @ (M @ Bp), (nv, np_)),
        F1r=stack("F1", lambda f: Bv.T @ f, (nv,)),
        F2r=stack("F2", lambda f: Bp.T @ f, (np_,)),
        Bv=Bv,
        Bp=Bp,
        v_groups=tuple(b.n for b in bases_v),
        extras=extras or {},
    )


def project_and_solve(model: ReducedModel, mu, n_v: int, n_p: int | None = None) -> ReducedSolution:
    return model.solve(mu, n_v, n_p)


def m_norm(x, M) -> float:
    return float(np.sqrt(max(x @ (M @ x), 0.0)))


def error_metrics(fom, rom, ip: InnerProducts, bases=None):
    """Relative velocity (``M_v``) and pressure (``M_p``) errors.

    ``rom`` is either a :class:`ReducedSolution` (``bases = (Bv, Bp)``
    required) or an already reconstructed ``(U, P)`` pair.
    """
    U, P = fom
    if isinstance(rom, ReducedSolution):
        if bases is None:
            raise ValueError("bases are required to reconstruct a reduced solution")
        Ur, Pr = rom.reconstruct(*bases)
    else:
        Ur, Pr = rom
    nu_, np_ = m_norm(U, ip.Mv), m_norm(P, ip.Mp)
    if nu_ == 0 or np_ == 0:
        raise ValueError("full-order solution has zero norm; relative error undefined")
    return m_norm(U - Ur, ip.Mv) / nu_, m_norm(P - Pr, ip.Mp) / np_


def projection_error(S, basis: PodBasis, M) -> float:
    """Total squared ``M``-orthogonal projection error of the columns of ``S``."""
    R = S - basis.B @ (basis.B.T @ (M @ S))
    return float(np.einsum("ij,ij->", R, M @ R))
