"""Conforming triangulation of a subdomain decomposition and its facets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DIRICHLET, NEUMANN, DomainDescription, MapSet, signed_areas


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Triangular mesh.

    Attributes
    ----------
    p : (Np, 2) ndarray
        Vertex coordinates.
    t : (Nel, 3) ndarray
        Counter-clockwise element connectivity.
    subdomain : (Nel,) ndarray
        Subdomain tag of every element.
    mu : tuple or None
        Parameter the coordinates correspond to (``None`` = reference).
    """

    p: np.ndarray
    t: np.ndarray
    subdomain: np.ndarray
    mu: tuple | None = None

    @property
    def n_elements(self) -> int:
        return len(self.t)

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.p, self.t)

    def element_coords(self) -> np.ndarray:
        """(Nel, 3, 2) vertex coordinates per element."""
        return self.p[self.t]

    def h_min(self) -> float:
        x = self.element_coords()
        return float(min(np.linalg.norm(x[:, (k + 1) % 3] - x[:, k], axis=1).min() for k in range(3)))


def generate_mesh(domain: DomainDescription, refinement: int = 0, mu=None) -> Mesh:
    """Refine every subdomain uniformly ``refinement`` times (4-way splits).

    Lattice points are numbered by the domain entity they live on, so nodes
    on a shared subdomain edge are created once and the mesh is conforming
    by construction.
    """
    if refinement < 0:
        raise MeshError("refinement level must be nonnegative")
    n = 2**refinement
    verts = domain.vertices_at(mu)
    index = {}
    coords = []

    def node(key, x):
        if key not in index:
            index[key] = len(coords)
            coords.append(x)
        return index[key]

    def lattice_key(tri, i, j):
        # barycentric lattice point (n-i-j, i, j) / n with respect to tri
        lam = {tri[0]: n - i - j, tri[1]: i, tri[2]: j}
        support = sorted(v for v, w in lam.items() if w > 0)
        if len(support) == 1:
            return ("v", support[0])
        if len(support) == 2:
            a, b = support
            return ("e", a, b, lam[b])
        return ("f", tuple(tri), i, j)

    elems, tags = [], []
    for s, tri in enumerate(domain.subdomains):
        tri = tuple(int(v) for v in tri)
        x0, x1, x2 = verts[list(tri)]
        ids = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                x = x0 + (i / n) * (x1 - x0) + (j / n) * (x2 - x0)
                ids[i, j] = node(lattice_key(tri, i, j), x)
        for i in range(n):
            for j in range(n - i):
                elems.append([ids[i, j], ids[i + 1, j], ids[i, j + 1]])
                tags.append(s)
                if i + j < n - 1:
                    elems.append([ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]])
                    tags.append(s)
    mesh = Mesh(
        p=np.array(coords, dtype=float),
        t=np.array(elems, dtype=np.int64),
        subdomain=np.array(tags, dtype=np.int64),
        mu=None if mu is None else tuple(mu),
    )
    if np.any(mesh.areas <= 0):
        raise MeshError("generated mesh has nonpositive element areas")
    return mesh


@dataclass(frozen=True)
class FacetList:
    """Interior and boundary facets with geometry.

    Interior arrays: ``plus``/``minus`` element indices (plus = lower index),
    ``plus_edge``/``minus_edge`` local edge numbers, ``normal`` unit normal
    from plus to minus, ``length``, ``verts`` the (start, end) mesh vertex
    indices oriented counter-clockwise with respect to the plus element.
    Boundary arrays are prefixed ``b_`` and carry an outward normal and the
    boundary ``b_tag`` and the domain boundary edge ``b_domain_edge``.
    """

    plus: np.ndarray
    minus: np.ndarray
    plus_edge: np.ndarray
    minus_edge: np.ndarray
    normal: np.ndarray
    length: np.ndarray
    verts: np.ndarray
    b_elem: np.ndarray
    b_edge: np.ndarray
    b_tag: np.ndarray
    b_normal: np.ndarray
    b_length: np.ndarray
    b_verts: np.ndarray
    b_domain_edge: np.ndarray

    @property
    def n_interior(self) -> int:
        return len(self.plus)

    @property
    def n_boundary(self) -> int:
        return len(self.b_elem)

    def boundary_mask(self, tag) -> np.ndarray:
        return self.b_tag == tag


def _edge_geometry(p, verts):
    d = p[verts[:, 1]] - p[verts[:, 0]]
    length = np.linalg.norm(d, axis=1)
    # outward for the element that traverses the edge counter-clockwise
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    return normal, length


def _on_segment(x, a, b, tol=1e-10):
    d = b - a
    L2 = d @ d
    s = ((x - a) @ d) / L2
    foot = a + np.outer(s, d)
    dist = np.linalg.norm(x - foot, axis=1)
    return (dist < tol) & (s > -tol) & (s < 1 + tol)


def build_facets(mesh: Mesh, domain: DomainDescription) -> FacetList:
    """Match element edges into interior and boundary facets."""
    seen = {}
    for e, tri in enumerate(mesh.t):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            seen.setdefault((min(a, b), max(a, b)), []).append((e, k, a, b))
    interior, boundary = [], []
    for key, owners in seen.items():
        if len(owners) == 2:
            (e0, k0, a0, b0), (e1, k1, _, _) = sorted(owners)
            interior.append((e0, e1, k0, k1, a0, b0))
        elif len(owners) == 1:
            boundary.append(owners[0])
        else:
            raise MeshError(f"edge {key} is shared by {len(owners)} elements")
    interior.sort()
    boundary.sort()

    iarr = np.array(interior, dtype=np.int64).reshape(-1, 6)
    barr = np.array(boundary, dtype=np.int64).reshape(-1, 4)
    verts = iarr[:, 4:6]
    b_verts = barr[:, 2:4]
    normal, length = _edge_geometry(mesh.p, verts)
    b_normal, b_length = _edge_geometry(mesh.p, b_verts)

    dverts = domain.vertices_at(mesh.mu)
    mid = 0.5 * (mesh.p[b_verts[:, 0]] + mesh.p[b_verts[:, 1]])
    ends = (mesh.p[b_verts[:, 0]], mesh.p[b_verts[:, 1]])
    b_tag = np.full(len(barr), "", dtype=object)
    b_domain_edge = np.full((len(barr), 2), -1, dtype=np.int64)
    for (da, db), tag in sorted(domain.boundary.items()):
        hit = _on_segment(mid, dverts[da], dverts[db])
        hit &= _on_segment(ends[0], dverts[da], dverts[db])
        hit &= _on_segment(ends[1], dverts[da], dverts[db])
        b_tag[hit] = tag
        b_domain_edge[hit] = (da, db)
    if np.any(b_tag == ""):
        bad = int(np.flatnonzero(b_tag == "")[0])
        raise MeshError(
            f"edge {tuple(b_verts[bad])} has a single neighbour but is not on the domain boundary "
            "(non-conforming mesh or hanging node)"
        )
    return FacetList(
        plus=iarr[:, 0], minus=iarr[:, 1], plus_edge=iarr[:, 2], minus_edge=iarr[:, 3],
        normal=normal, length=length, verts=verts,
        b_elem=barr[:, 0], b_edge=barr[:, 1], b_tag=b_tag.astype(str),
        b_normal=b_normal, b_length=b_length, b_verts=b_verts, b_domain_edge=b_domain_edge,
    )


def deform_mesh(mesh: Mesh, ms: MapSet, tol: float = 1e-12) -> Mesh:
    """Move every vertex of a reference mesh with the map of the subdomain that owns it."""
    if mesh.mu is not None:
        raise MeshError(f"mesh is already deformed to mu={mesh.mu}; maps act on the reference mesh")
    new = np.full_like(mesh.p, np.nan)
    for s in range(len(ms)):
        vids = np.unique(mesh.t[mesh.subdomain == s])
        img = ms[s](mesh.p[vids])
        prev = new[vids]
        known = ~np.isnan(prev[:, 0])
        if known.any():
            gap = np.abs(prev[known] - img[known]).max()
            if gap > tol:
                raise MeshError(f"shared vertex receives inconsistent images (gap {gap:.3g})")
        new[vids] = img
    return Mesh(p=new, t=mesh.t, subdomain=mesh.subdomain, mu=tuple(ms.mu))


def single_triangle_mesh(tri=((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))) -> tuple[Mesh, DomainDescription]:
    """One-element mesh whose three edges form a Dirichlet boundary."""
    verts = np.asarray(tri, dtype=float)
    domain = DomainDescription(
        vertices=verts,
        subdomains=np.array([[0, 1, 2]]),
        boundary={(0, 1): DIRICHLET, (1, 2): DIRICHLET, (0, 2): DIRICHLET},
        moving=None,
        name="triangle",
    )
    mesh = Mesh(p=verts, t=np.array([[0, 1, 2]]), subdomain=np.array([0]))
    return mesh, domain


__all__ = [
    "Mesh", "FacetList", "MeshError", "generate_mesh", "build_facets", "deform_mesh",
    "single_triangle_mesh", "DIRICHLET", "NEUMANN",
]
