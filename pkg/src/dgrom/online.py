"""Online phase: coefficient evaluation, reduced assembly and solve.

Everything needed after the offline stage lives in :class:`ReducedModel`,
which loads from a single archive and only imports the geometry and
coefficient modules.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .archive import pack_blocks, pack_json, unpack_blocks, unpack_json
from .geometry import DomainDescription, build_maps
from .theta import ThetaRecipes, theta_values


class ReducedSolveError(RuntimeError):
    pass


@dataclass
class ReducedSolution:
    """Reduced coefficients; ``v_cols`` are the velocity basis columns in use."""

    mu: tuple
    U_N: np.ndarray
    P_N: np.ndarray
    v_cols: np.ndarray
    residual: float = 0.0
    t_assemble: float = 0.0
    t_solve: float = 0.0

    def reconstruct(self, Bv, Bp):
        return Bv[:, self.v_cols] @ self.U_N, Bp[:, : len(self.P_N)] @ self.P_N


@dataclass
class ReducedModel:
    """Offline-projected blocks ``Bv^T A_q Bv``, ``Bv^T B_q Bp``, ``Bv^T F1_q``, ``Bp^T F2_q``.

    Blocks are projected with the full retained bases; a smaller reduced
    dimension uses the leading sub-blocks. The velocity basis is a
    concatenation of ``v_groups`` column groups (one for a joint POD, one
    per component for a componentwise POD); ``n_v`` modes are taken from
    each group.
    """

    domain: DomainDescription
    recipes: ThetaRecipes
    alpha_scaling: bool
    idx: dict
    Ar: np.ndarray
    Br: np.ndarray
    F1r: np.ndarray
    F2r: np.ndarray
    Bv: np.ndarray
    Bp: np.ndarray
    v_groups: tuple
    extras: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)

    @property
    def max_n(self) -> int:
        """Largest common reduced dimension over all velocity groups and pressure."""
        return int(min(min(self.v_groups), self.Bp.shape[1]))

    def velocity_columns(self, n_v) -> np.ndarray:
        sizes = np.broadcast_to(np.asarray(n_v, dtype=np.int64), (len(self.v_groups),))
        offsets = np.concatenate([[0], np.cumsum(self.v_groups)[:-1]])
        if np.any(sizes < 1):
            raise ValueError(f"reduced dimension must be >= 1, got {n_v}")
        if np.any(sizes > np.asarray(self.v_groups)):
            raise ValueError(f"velocity dimension {n_v} exceeds usable maximum {tuple(self.v_groups)}")
        return np.concatenate([o + np.arange(n) for o, n in zip(offsets, sizes)])

    def check_n(self, n_v, n_p):
        if n_p < 1:
            raise ValueError(f"reduced dimension must be >= 1, got {n_p}")
        if n_p > self.Bp.shape[1]:
            raise ValueError(f"pressure dimension {n_p} exceeds usable maximum {self.Bp.shape[1]}")
        return self.velocity_columns(n_v)

    def theta(self, mu) -> np.ndarray:
        ms = build_maps(self.domain, mu)
        G = np.stack([m.G for m in ms.maps])
        return theta_values(self.recipes, G, ms.alpha, self.alpha_scaling)

    def assemble(self, mu, cols, n_p):
        th = self.theta(mu)
        Ar, Br, F1r = self.Ar, self.Br, self.F1r
        if len(cols) != Ar.shape[1]:
            Ar, Br, F1r = Ar[:, cols][:, :, cols], Br[:, cols], F1r[:, cols]
        A = np.tensordot(th[self.idx["A"]], Ar, axes=1)
        B = np.tensordot(th[self.idx["B"]], Br[:, :, :n_p], axes=1)
        F1 = th[self.idx["F1"]] @ F1r
        F2 = th[self.idx["F2"]] @ self.F2r[:, :n_p]
        K = np.block([[A, B], [B.T, np.zeros((n_p, n_p))]])
        return K, np.concatenate([F1, F2])

    def solve(self, mu, n_v, n_p=None, rtol=1e-10, cond_tol=1e-14) -> ReducedSolution:
        """Reduced solve with ``n_v`` modes per velocity group and ``n_p`` pressure modes."""
        n_p = int(np.max(n_v)) if n_p is None else n_p
        cols = self.check_n(n_v, n_p)
        t0 = time.perf_counter()
        K, rhs = self.assemble(mu, cols, n_p)
        t1 = time.perf_counter()
        sol = solve_pivoted(K, rhs, cond_tol)
        t2 = time.perf_counter()
        scale = np.linalg.norm(rhs)
        res = np.linalg.norm(K @ sol - rhs) / scale if scale > 0 else 0.0
        if res > rtol:
            raise ReducedSolveError(
                f"reduced saddle system at mu={tuple(mu)} solved with relative residual {res:.3g}; "
                "try a smaller reduced dimension or inspect the pressure basis"
            )
        nv = len(cols)
        return ReducedSolution(tuple(mu), sol[:nv], sol[nv:], cols, res, t1 - t0, t2 - t1)

    def vertex_fields(self, U, P):
        """Per-element vertex values ``(Nel, 3, 2)`` and ``(Nel, 3)`` of full coefficient vectors."""
        nel, m = int(self.extras["n_elements"]), int(self.extras["vel_local"])
        return U.reshape(nel, 2, m)[:, :, :3].transpose(0, 2, 1), P.reshape(nel, -1)[:, :3]

    def save(self, path):
        meta = {"domain": self.domain.to_json(), "alpha_scaling": self.alpha_scaling,
                "idx": {k: v.tolist() for k, v in self.idx.items()}, "extras": self.extras,
                "v_groups": [int(g) for g in self.v_groups]}
        arrays = dict(Ar=self.Ar, Br=self.Br, F1r=self.F1r, F2r=self.F2r, Bv=self.Bv, Bp=self.Bp)
        arrays.update({f"recipe_{k}": v for k, v in self.recipes.as_arrays().items()})
        meta["aux"] = sorted(self.aux)
        for name, value in self.aux.items():
            arrays.update(pack_blocks(f"aux_{name}", [value]))
        np.savez_compressed(path, meta=pack_json(meta), **arrays)

    @classmethod
    def load(cls, path) -> "ReducedModel":
        with np.load(path) as z:
            meta = unpack_json(z["meta"])
            recipes = ThetaRecipes(*(z[f"recipe_{k}"] for k in ("kind", "sub", "i", "j", "tangent")))
            arrays = {k: z[k] for k in ("Ar", "Br", "F1r", "F2r", "Bv", "Bp")}
            aux = {name: unpack_blocks(f"aux_{name}", z)[0] for name in meta.get("aux", [])}
        return cls(
            domain=DomainDescription.from_json(meta["domain"]),
            recipes=recipes,
            alpha_scaling=meta["alpha_scaling"],
            idx={k: np.array(v, dtype=np.int64) for k, v in meta["idx"].items()},
            v_groups=tuple(meta["v_groups"]),
            extras=meta.get("extras", {}),
            aux=aux,
            **arrays,
        )


def solve_pivoted(K, rhs, cond_tol=1e-14):
    """Dense solve by QR with column pivoting; rank deficiency is reported."""
    Q, R, piv = sla.qr(K, pivoting=True)
    d = np.abs(np.diag(R))
    if d[0] == 0 or d[-1] <= cond_tol * d[0]:
        raise ReducedSolveError(
            f"reduced saddle matrix is numerically singular (|R_nn|/|R_11| = {d[-1] / max(d[0], 1e-300):.2e}); "
            "use a smaller reduced dimension or check reduced inf-sup stability of the pressure basis"
        )
    y = sla.solve_triangular(R, Q.T @ rhs)
    x = np.empty_like(y)
    x[piv] = y
    return x
