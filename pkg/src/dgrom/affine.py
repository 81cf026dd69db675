"""Offline affine decomposition of the DG Stokes operators.

On a subdomain with map ``x = G xhat + c``, gradients transform with
``G^-T``, volumes with ``det G`` and ``n ds`` with ``det G * G^-T nhat dshat``.
Each one-sided facet product (gradient on one side, test/trial trace on
either side) therefore transforms with the map of the gradient's side only;
both maps agree on a shared edge so the edge factor can be taken from
either. The penalty is kept as assembled on the reference domain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .archive import pack_blocks, pack_json, unpack_blocks, unpack_json
from .dgspace import DGSpace
from .fom import (
    A_TERMS, B_TERMS, F1_TERMS, F2_TERMS, PhysicsConfig, StokesSystem, matrix_terms, vector_terms,
    _boundary_data, _dirichlet_values,
)
from .geometry import DIRICHLET, DomainDescription, MapSet, validate_maps
from .mesh import FacetList
from .theta import ThetaRecipes, ThetaVector, evaluate_theta

OPERATOR_OF = {**{t: "A" for t in A_TERMS}, **{t: "B" for t in B_TERMS},
               **{t: "F1" for t in F1_TERMS}, **{t: "F2" for t in F2_TERMS}}

_RECIPE = {
    "viscous": "visc", "consistency": "visc", "symmetry": "visc", "symmetry_lift": "visc",
    "penalty": "alpha", "penalty_lift": "alpha",
    "divergence": "adj", "pressure_jump": "adj", "continuity_lift": "adj",
    "source": "det", "neumann": "stretch",
}


class AffineError(ValueError):
    pass


@dataclass
class AffineOperator:
    """Parameter-independent blocks with their coefficient recipes.

    ``terms[q] = (operator, term, key)`` labels block ``blocks[q]`` whose
    coefficient is recipe row ``q``.
    """

    terms: list
    recipes: ThetaRecipes
    blocks: list
    n_u: int
    n_p: int
    alpha_scaling: bool = False

    @property
    def q_a(self) -> int:
        return sum(1 for op, _, _ in self.terms if op == "A")

    def indices(self, operator=None, term=None) -> np.ndarray:
        return np.array([q for q, (op, t, _) in enumerate(self.terms)
                         if (operator is None or op == operator) and (term is None or t == term)], dtype=np.int64)

    def theta(self, ms: MapSet, tol: float = 1e-12) -> ThetaVector:
        report = validate_maps(ms)
        if report.max_residual > tol:
            raise AffineError(f"subdomain maps disagree on a shared edge (residual {report.max_residual:.3g})")
        return evaluate_theta(self.recipes, ms, self.alpha_scaling)

    def combine(self, theta, idx):
        theta = theta.values if isinstance(theta, ThetaVector) else np.asarray(theta)
        if len(theta) != len(self.blocks):
            raise AffineError(f"theta has {len(theta)} entries, decomposition has {len(self.blocks)}")
        acc = None
        for q in idx:
            term = theta[q] * self.blocks[q]
            acc = term if acc is None else acc + term
        return acc

    def term_sum(self, theta, term: str):
        return self.combine(theta, self.indices(term=term))

    def save(self, path):
        meta = {"terms": [[op, t, None if k is None else list(k)] for op, t, k in self.terms],
                "n_u": self.n_u, "n_p": self.n_p, "alpha_scaling": self.alpha_scaling}
        arrays = pack_blocks("block", self.blocks)
        arrays.update({f"recipe_{k}": v for k, v in self.recipes.as_arrays().items()})
        np.savez_compressed(path, meta=pack_json(meta), **arrays)

    @classmethod
    def load(cls, path) -> "AffineOperator":
        with np.load(path) as store:
            meta = unpack_json(store["meta"])
            blocks = unpack_blocks("block", store)
            recipes = ThetaRecipes(*(store[f"recipe_{k}"] for k in ("kind", "sub", "i", "j", "tangent")))
        terms = [(op, t, None if k is None else tuple(k)) for op, t, k in meta["terms"]]
        return cls(terms, recipes, blocks, meta["n_u"], meta["n_p"], meta["alpha_scaling"])


def _check_moving_dirichlet(space, facets, domain, cfg):
    fd = _boundary_data(space, facets, DIRICHLET)
    uD = _dirichlet_values(fd, cfg)
    edges = facets.b_domain_edge[facets.boundary_mask(DIRICHLET)]
    moving = np.array([domain.edge_is_moving(tuple(e)) for e in edges], dtype=bool)
    if moving.any() and np.abs(uD[moving]).max() > 0:
        raise AffineError("Dirichlet data must vanish on boundary edges that move with the parameter")


def _recipe_row(term, key, domain):
    kind = _RECIPE[term]
    if key is None:
        return (kind, 0, 0, 0, None)
    if kind == "det":
        return (kind, key[0], 0, 0, None)
    if kind == "stretch":
        s, da, db = key
        v = domain.vertices_at(None)
        t = v[db] - v[da]
        return (kind, s, 0, 0, tuple(t / np.linalg.norm(t)))
    s, i, j = key
    return (kind, s, i, j, None)


def decompose(space: DGSpace, facets: FacetList, cfg: PhysicsConfig, domain: DomainDescription,
              alpha_scaling: bool = False) -> AffineOperator:
    """Split all operators into reference-domain blocks and coefficient recipes."""
    if space.mesh.mu is not None:
        raise AffineError("decomposition must be built on the reference mesh")
    _check_moving_dirichlet(space, facets, domain, cfg)
    mats = matrix_terms(space, facets, cfg, resolve=True)
    vecs = vector_terms(space, facets, cfg, resolve=True)
    terms, rows, blocks = [], [], []
    for term, family in {**mats, **vecs}.items():
        for key in sorted(family, key=lambda k: () if k is None else k):
            B = family[key]
            if sp.issparse(B):
                B.eliminate_zeros()
                if B.nnz == 0:
                    continue
            elif not np.any(B):
                continue
            terms.append((OPERATOR_OF[term], term, key))
            rows.append(_recipe_row(term, key, domain))
            blocks.append(B)
    return AffineOperator(terms, ThetaRecipes.from_rows(rows), blocks, space.n_u, space.n_p, alpha_scaling)


def assemble_online(op: AffineOperator, theta) -> StokesSystem:
    """Full-order system at the parameter of ``theta`` as a weighted block sum."""
    def part(name, zero):
        idx = op.indices(operator=name)
        return zero if len(idx) == 0 else op.combine(theta, idx)

    A = part("A", sp.csr_matrix((op.n_u, op.n_u)))
    B = part("B", sp.csr_matrix((op.n_u, op.n_p)))
    F1 = part("F1", np.zeros(op.n_u))
    F2 = part("F2", np.zeros(op.n_p))
    return StokesSystem(A.tocsr(), B.tocsr(), F1, F2)
