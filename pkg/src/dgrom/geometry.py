"""Parametrized obstacle channel and its piecewise-affine subdomain maps.

The reference domain is the unit square with a triangular obstacle whose
base sits on ``y = 0`` between ``(0.3, 0)`` and ``(0.7, 0)``. The obstacle
tip is the geometric parameter ``mu``. The domain is split into triangular
subdomains; each subdomain is carried to its deformed shape by an affine
map ``x = G @ xhat + c``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

DEFAULT_BOX = ((0.4, 0.6), (0.2, 0.4))
MU_BAR = (0.5, 0.3)


class GeometryError(ValueError):
    """Raised for invalid domains, parameters or maps."""


@dataclass(frozen=True)
class ParameterTuple:
    """Obstacle tip position ``(x, y)`` inside an admissible box."""

    x: float
    y: float
    box: tuple = DEFAULT_BOX

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.box
        if not (x0 <= self.x <= x1 and y0 <= self.y <= y1):
            raise GeometryError(
                f"parameter ({self.x}, {self.y}) outside admissible box {self.box}"
            )

    @property
    def array(self):
        return np.array([self.x, self.y], dtype=float)

    def __iter__(self):
        yield self.x
        yield self.y


def as_parameter(mu, box=DEFAULT_BOX) -> ParameterTuple:
    if isinstance(mu, ParameterTuple):
        return mu
    x, y = mu
    return ParameterTuple(float(x), float(y), tuple(tuple(b) for b in box))


@dataclass(frozen=True)
class DomainDescription:
    """Polygonal domain split into triangular subdomains.

    ``vertices`` holds the reference positions. ``moving`` is the index of the
    vertex that follows the parameter (``None`` for a parameter-free domain).
    ``boundary`` maps a sorted vertex pair to its boundary tag.
    """

    vertices: np.ndarray
    subdomains: np.ndarray
    boundary: dict
    moving: int | None = None
    mu_bar: tuple = MU_BAR
    box: tuple = DEFAULT_BOX
    name: str = "obstacle"

    @property
    def n_subdomains(self) -> int:
        return len(self.subdomains)

    def vertices_at(self, mu=None) -> np.ndarray:
        """Vertex positions of the domain deformed to parameter ``mu``."""
        v = np.array(self.vertices, dtype=float)
        if mu is not None and self.moving is not None:
            v[self.moving] = np.asarray(tuple(mu), dtype=float)
        return v

    def subdomain_areas(self, mu=None) -> np.ndarray:
        v = self.vertices_at(mu)
        return signed_areas(v, self.subdomains)

    def area(self, mu=None) -> float:
        return float(self.subdomain_areas(mu).sum())

    def edge_is_moving(self, edge) -> bool:
        return self.moving is not None and self.moving in edge

    def interface_edges(self):
        """Subdomain edges shared by two subdomains, as sorted vertex pairs."""
        count = {}
        for tri in self.subdomains:
            for k in range(3):
                e = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
                count[e] = count.get(e, 0) + 1
        return sorted(e for e, c in count.items() if c == 2)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "vertices": np.asarray(self.vertices).tolist(),
            "subdomains": np.asarray(self.subdomains).tolist(),
            "boundary": [[int(a), int(b), tag] for (a, b), tag in sorted(self.boundary.items())],
            "moving": self.moving,
            "mu_bar": list(self.mu_bar),
            "box": [list(b) for b in self.box],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DomainDescription":
        doc = json.loads(text)
        domain = cls(
            vertices=np.array(doc["vertices"], dtype=float),
            subdomains=np.array(doc["subdomains"], dtype=np.int64),
            boundary={(a, b): tag for a, b, tag in doc["boundary"]},
            moving=doc["moving"],
            mu_bar=tuple(doc["mu_bar"]),
            box=tuple(tuple(b) for b in doc["box"]),
            name=doc.get("name", "custom"),
        )
        _check_domain(domain)
        return domain


def signed_areas(points, triangles) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    t = np.asarray(triangles)
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _check_domain(domain: DomainDescription):
    corners = _box_probe_points(domain.box)
    probes = [None] if domain.moving is None else corners
    for mu in probes:
        areas = domain.subdomain_areas(mu)
        bad = np.flatnonzero(areas <= 0)
        if bad.size:
            raise GeometryError(
                f"subdomain {int(bad[0])} is degenerate (signed area {areas[bad[0]]:.3g}) at mu={mu}"
            )


def _box_probe_points(box):
    (x0, x1), (y0, y1) = box
    return [(x0, y0), (x1, y0), (x0, y1), (x1, y1), (0.5 * (x0 + x1), 0.5 * (y0 + y1))]


def _fan(tip, chain, tags, moving, name, box=DEFAULT_BOX, mu_bar=MU_BAR):
    vertices = np.vstack([np.asarray(chain, dtype=float), np.asarray(tip, dtype=float)[None]])
    t = len(chain)
    tris = []
    for k in range(len(chain) - 1 if moving is not None else len(chain)):
        a, b = k, (k + 1) % len(chain)
        tri = [t, a, b]
        if signed_areas(vertices, np.array([tri]))[0] < 0:
            tri = [t, b, a]
        tris.append(tri)
    boundary = {}
    n_edges = len(chain) - 1 if moving is not None else len(chain)
    for k in range(n_edges):
        boundary[tuple(sorted((k, (k + 1) % len(chain))))] = tags[k]
    if moving is not None:
        boundary[tuple(sorted((0, t)))] = DIRICHLET
        boundary[tuple(sorted((len(chain) - 1, t)))] = DIRICHLET
    domain = DomainDescription(
        vertices=vertices,
        subdomains=np.array(tris, dtype=np.int64),
        boundary=boundary,
        moving=t if moving is not None else None,
        mu_bar=mu_bar,
        box=box,
        name=name,
    )
    _check_domain(domain)
    return domain


OBSTACLE_CHAIN = [
    (0.3, 0.0), (0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (1 / 3, 1.0),
    (2 / 3, 1.0), (1.0, 1.0), (1.0, 0.5), (1.0, 0.0), (0.7, 0.0),
]
OBSTACLE_TAGS = [DIRICHLET] * 6 + [NEUMANN, NEUMANN] + [DIRICHLET]

CHANNEL_CHAIN = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
CHANNEL_TAGS = [DIRICHLET, NEUMANN, DIRICHLET, DIRICHLET]


def build_reference_domain(kind: str = "obstacle", box=DEFAULT_BOX, mu_bar=MU_BAR) -> DomainDescription:
    """Build the reference domain at ``mu_bar``.

    ``"obstacle"`` is the 9-triangle fan around the obstacle tip over the
    outer boundary chain. ``"channel"`` is the plain unit square (no
    obstacle, four triangles around the centre), used to validate the
    solver against Poiseuille flow.
    """
    if kind == "obstacle":
        return _fan(mu_bar, OBSTACLE_CHAIN, OBSTACLE_TAGS, moving=True, name=kind, box=box, mu_bar=mu_bar)
    if kind == "channel":
        return _fan((0.5, 0.5), CHANNEL_CHAIN, CHANNEL_TAGS, moving=None, name=kind, box=box, mu_bar=mu_bar)
    raise GeometryError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class AffineMap:
    G: np.ndarray
    c: np.ndarray
    detG: float = field(init=False)
    Ginv: np.ndarray = field(init=False)
    GinvT: np.ndarray = field(init=False)

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        if det <= 0:
            raise GeometryError(f"affine map is not orientation preserving (det G = {det:.3g})")
        inv = np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]]) / det
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        object.__setattr__(self, "detG", float(det))
        object.__setattr__(self, "Ginv", inv)
        object.__setattr__(self, "GinvT", inv.T.copy())

    def __call__(self, xhat):
        return np.asarray(xhat, dtype=float) @ self.G.T + self.c


@dataclass(frozen=True)
class MapSet:
    mu: tuple
    maps: tuple
    alpha: float
    domain: DomainDescription

    def __len__(self):
        return len(self.maps)

    def __getitem__(self, i) -> AffineMap:
        return self.maps[i]


def solve_vertex_map(ref_tri, def_tri) -> AffineMap:
    """Affine map sending three reference vertices onto three deformed ones."""
    ref_tri = np.asarray(ref_tri, dtype=float)
    def_tri = np.asarray(def_tri, dtype=float)
    # unknowns (g11, g12, c1) for x and (g21, g22, c2) for y share one 3x3 system
    V = np.column_stack([ref_tri, np.ones(3)])
    if abs(np.linalg.det(V)) < 1e-14:
        raise GeometryError("reference vertices are collinear; vertex map is singular")
    sol = np.linalg.solve(V, def_tri)
    G = sol[:2].T
    c = sol[2]
    return AffineMap(G, c)


def _skeleton_length(domain, verts) -> float:
    edges = set(domain.interface_edges())
    edges.update(e for e, tag in domain.boundary.items() if tag == DIRICHLET)
    return float(sum(np.linalg.norm(verts[a] - verts[b]) for a, b in edges))


def build_maps(domain: DomainDescription, mu) -> MapSet:
    """Per-subdomain affine maps from the reference configuration to ``mu``."""
    mu = as_parameter(mu, domain.box)
    ref = domain.vertices_at(None)
    cur = domain.vertices_at(tuple(mu))
    maps = []
    for i, tri in enumerate(domain.subdomains):
        try:
            maps.append(solve_vertex_map(ref[tri], cur[tri]))
        except GeometryError as exc:
            raise GeometryError(f"subdomain {i}: {exc}") from None
    alpha = _skeleton_length(domain, cur) / _skeleton_length(domain, ref)
    return MapSet(mu=(mu.x, mu.y), maps=tuple(maps), alpha=alpha, domain=domain)


def barycentric(tri, x) -> np.ndarray:
    tri = np.asarray(tri, dtype=float)
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    l12 = np.linalg.solve(T, np.asarray(x, dtype=float) - tri[0])
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


def map_point(ms: MapSet, subdomain: int, xhat, tol: float = 1e-12):
    """Image of the reference point ``xhat`` under the map of ``subdomain``."""
    tri = ms.domain.vertices_at(None)[ms.domain.subdomains[subdomain]]
    lam = barycentric(tri, xhat)
    if lam.min() < -tol:
        raise GeometryError(f"point {tuple(xhat)} lies outside reference subdomain {subdomain}")
    return ms[subdomain](xhat)


@dataclass
class ValidationReport:
    det: np.ndarray
    residuals: dict
    alpha: float
    tol: float = 1e-14

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.det > 0) and self.max_residual <= self.tol)


def validate_maps(ms: MapSet, domain: DomainDescription | None = None) -> ValidationReport:
    """Check orientation and continuity of the maps across shared edges."""
    domain = domain or ms.domain
    ref = domain.vertices_at(None)
    owners = {}
    for i, tri in enumerate(domain.subdomains):
        for k in range(3):
            e = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
            owners.setdefault(e, []).append(i)
    residuals = {}
    for e, subs in owners.items():
        if len(subs) != 2:
            continue
        pa = ms[subs[0]](ref[list(e)])
        pb = ms[subs[1]](ref[list(e)])
        residuals[e] = float(np.abs(pa - pb).max())
    det = np.array([m.detG for m in ms.maps])
    return ValidationReport(det=det, residuals=residuals, alpha=ms.alpha)
