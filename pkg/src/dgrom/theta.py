"""Closed-form affine coefficients in terms of subdomain Jacobian entries.

With ``G = [[g11, g12], [g21, g22]]`` and ``det = g11 g22 - g12 g21``:

* ``visc`` (a, b): ``det * (G^-1 G^-T)_ab``, i.e. ``(g12^2 + g22^2)/det``,
  ``-(g11 g12 + g21 g22)/det`` and ``(g11^2 + g21^2)/det``;
* ``adj`` (a, c): ``det * (G^-1)_ac``, the adjugate ``[[g22, -g12], [-g21, g11]]``;
* ``det``: ``det``;
* ``stretch``: ``|G t|`` for a unit reference tangent ``t``;
* ``one`` / ``alpha``: 1, or the boundary-length ratio when penalty scaling
  is switched on.

Nothing here touches quadrature or sparse matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("one", "alpha", "visc", "adj", "det", "stretch")
_CODE = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class ThetaRecipes:
    """Column table of coefficient recipes, one row per affine term."""

    kind: np.ndarray
    sub: np.ndarray
    i: np.ndarray
    j: np.ndarray
    tangent: np.ndarray

    def __len__(self):
        return len(self.kind)

    @classmethod
    def from_rows(cls, rows):
        """Rows are ``(kind, sub, i, j, tangent)`` with tangent a 2-tuple or None."""
        kind = np.array([_CODE[r[0]] for r in rows], dtype=np.int64)
        sub = np.array([r[1] for r in rows], dtype=np.int64)
        i = np.array([r[2] for r in rows], dtype=np.int64)
        j = np.array([r[3] for r in rows], dtype=np.int64)
        tan = np.array([r[4] if r[4] is not None else (0.0, 0.0) for r in rows], dtype=float).reshape(-1, 2)
        return cls(kind, sub, i, j, tan)

    def as_arrays(self) -> dict:
        return {"kind": self.kind, "sub": self.sub, "i": self.i, "j": self.j, "tangent": self.tangent}


@dataclass(frozen=True)
class ThetaVector:
    mu: tuple
    values: np.ndarray


def jacobian_stack(ms) -> np.ndarray:
    return np.stack([m.G for m in ms.maps])


def theta_values(recipes: ThetaRecipes, G: np.ndarray, alpha: float = 1.0, alpha_scaling: bool = False) -> np.ndarray:
    """Evaluate every recipe for the Jacobians ``G`` (n_su, 2, 2)."""
    g11, g12, g21, g22 = G[:, 0, 0], G[:, 0, 1], G[:, 1, 0], G[:, 1, 1]
    det = g11 * g22 - g12 * g21
    if np.any(det <= 0):
        raise ValueError(f"nonpositive Jacobian determinant in subdomain {int(np.argmin(det))}")
    visc = np.empty((len(G), 2, 2))
    visc[:, 0, 0] = (g12**2 + g22**2) / det
    visc[:, 1, 1] = (g11**2 + g21**2) / det
    visc[:, 0, 1] = visc[:, 1, 0] = -(g11 * g12 + g21 * g22) / det
    adj = np.stack([np.stack([g22, -g12], -1), np.stack([-g21, g11], -1)], 1)

    out = np.ones(len(recipes))
    k, s, i, j = recipes.kind, recipes.sub, recipes.i, recipes.j
    m = k == _CODE["alpha"]
    out[m] = alpha if alpha_scaling else 1.0
    m = k == _CODE["visc"]
    out[m] = visc[s[m], i[m], j[m]]
    m = k == _CODE["adj"]
    out[m] = adj[s[m], i[m], j[m]]
    m = k == _CODE["det"]
    out[m] = det[s[m]]
    m = k == _CODE["stretch"]
    if m.any():
        out[m] = np.linalg.norm(np.einsum("nab,nb->na", G[s[m]], recipes.tangent[m]), axis=1)
    return out


def evaluate_theta(recipes: ThetaRecipes, ms, alpha_scaling: bool = False) -> ThetaVector:
    return ThetaVector(tuple(ms.mu), theta_values(recipes, jacobian_stack(ms), ms.alpha, alpha_scaling))
