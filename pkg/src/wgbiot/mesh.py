"""Polygonal meshes with shared-edge connectivity.

Elements store counter-clockwise vertex lists.  Local edge ``j`` of an element
runs from vertex ``j`` to vertex ``j + 1``; every global edge keeps the
orientation of the first element that referenced it, which fixes the edge
parametrization used by the edge degrees of freedom.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import ArgumentError, GeometryError

MAX_LEVEL = 8


class BoundaryTag(str, enum.Enum):
    INTERIOR = "Interior"
    GAMMA_C_U = "GammaC_u"  # Dirichlet displacement
    GAMMA_T_U = "GammaT_u"  # traction (natural) displacement
    GAMMA_T_P = "GammaT_p"  # Dirichlet pressure
    GAMMA_C_P = "GammaC_p"  # no-flux (natural) pressure


class CutStyle(str, enum.Enum):
    CHEVRON = "Chevron"
    STAIR_L = "StairL"


@dataclass(frozen=True)
class PolygonalElement:
    id: int
    vertex_ids: tuple[int, ...]
    edge_ids: tuple[int, ...]
    edge_reversed: tuple[bool, ...]
    centroid: np.ndarray
    area: float
    diameter: float
    is_convex: bool

    @property
    def num_edges(self) -> int:
        return len(self.vertex_ids)


@dataclass(frozen=True)
class Edge:
    id: int
    endpoint_ids: tuple[int, int]
    length: float
    neighbor_elements: tuple[int, ...]
    outward_normals: tuple[np.ndarray, ...]
    u_tag: BoundaryTag = BoundaryTag.INTERIOR
    p_tag: BoundaryTag = BoundaryTag.INTERIOR
    side: str | None = None

    @property
    def is_boundary(self) -> bool:
        return len(self.neighbor_elements) == 1


@dataclass(frozen=True)
class Mesh:
    points: np.ndarray
    edges: tuple[Edge, ...]
    elements: tuple[PolygonalElement, ...]
    level: int = 0
    mesh_size: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mesh_size", max(el.diameter for el in self.elements))

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def element_vertices(self, e: int) -> np.ndarray:
        return self.points[list(self.elements[e].vertex_ids)]

    def edge_endpoints(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.edges[i].endpoint_ids
        return self.points[a], self.points[b]

    def boundary_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.is_boundary]

    def with_boundary_tags(
        self, tagger: Callable[[Edge], tuple[BoundaryTag, BoundaryTag]]
    ) -> "Mesh":
        """Return a copy whose boundary edges are retagged by ``tagger(edge)``."""
        edges = tuple(
            replace(e, u_tag=t[0], p_tag=t[1]) if e.is_boundary else e
            for e, t in ((e, tagger(e) if e.is_boundary else None) for e in self.edges)
        )
        return replace(self, edges=edges)


def signed_area(verts: np.ndarray) -> float:
    # shoelace about the vertex mean, so far-from-origin polygons keep their digits
    verts = np.asarray(verts, dtype=float)
    rel = verts - verts.mean(axis=0)
    x, y = rel[:, 0], rel[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    verts = np.asarray(verts, dtype=float)
    origin = verts.mean(axis=0)
    rel = verts - origin
    x, y = rel[:, 0], rel[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        raise GeometryError("zero-area polygon has no centroid")
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return origin + np.array([cx, cy])


def polygon_diameter(verts: np.ndarray) -> float:
    d = verts[:, None, :] - verts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


def classify_convexity(verts, diameter: float | None = None) -> bool:
    """True iff every turn of the CCW boundary ``verts`` is non-negative.

    The tolerance scales with ``h_T**2`` so the answer is stable under refinement.
    """
    verts = np.asarray(verts, dtype=float)
    area = signed_area(verts)
    h = polygon_diameter(verts) if diameter is None else diameter
    if not area > 1e-14 * h * h:
        raise GeometryError(f"degenerate polygon (signed area {area:.3e})")
    d1 = verts - np.roll(verts, 1, axis=0)
    d2 = np.roll(verts, -1, axis=0) - verts
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return bool(np.all(cross >= -1e-12 * h * h))


def _side_of(pa: np.ndarray, pb: np.ndarray, tol: float = 1e-12) -> str | None:
    for name, axis, value in (("left", 0, 0.0), ("right", 0, 1.0), ("bottom", 1, 0.0), ("top", 1, 1.0)):
        if abs(pa[axis] - value) < tol and abs(pb[axis] - value) < tol:
            return name
    return None


def build_mesh(
    points: np.ndarray,
    polygons: Sequence[Sequence[int]],
    level: int = 0,
    edge_list: Sequence[tuple[int, int]] | None = None,
) -> Mesh:
    """Assemble connectivity from CCW vertex lists.

    When ``edge_list`` is given, edge ids follow that list (used when reading
    a dump); otherwise edges are numbered by first appearance.
    """
    points = np.asarray(points, dtype=float)
    key_to_id: dict[tuple[int, int], int] = {}
    endpoints: list[tuple[int, int]] = []
    if edge_list is not None:
        for a, b in edge_list:
            key_to_id[(min(a, b), max(a, b))] = len(endpoints)
            endpoints.append((int(a), int(b)))

    neighbors: dict[int, list[int]] = {}
    normals: dict[int, list[np.ndarray]] = {}
    elements = []
    for eid, poly in enumerate(polygons):
        poly = tuple(int(v) for v in poly)
        verts = points[list(poly)]
        edge_ids, reversed_ = [], []
        for j, a in enumerate(poly):
            b = poly[(j + 1) % len(poly)]
            key = (min(a, b), max(a, b))
            if key not in key_to_id:
                key_to_id[key] = len(endpoints)
                endpoints.append((a, b))
            i = key_to_id[key]
            edge_ids.append(i)
            reversed_.append(endpoints[i][0] != a)
            t = points[b] - points[a]
            L = np.hypot(*t)
            with np.errstate(invalid="ignore", divide="ignore"):
                n = np.array([t[1], -t[0]]) / L
            neighbors.setdefault(i, []).append(eid)
            normals.setdefault(i, []).append(n)
        diameter = polygon_diameter(verts)
        elements.append(
            PolygonalElement(
                id=eid,
                vertex_ids=poly,
                edge_ids=tuple(edge_ids),
                edge_reversed=tuple(reversed_),
                centroid=polygon_centroid(verts),
                area=signed_area(verts),
                diameter=diameter,
                is_convex=classify_convexity(verts, diameter),
            )
        )

    edges = []
    for i, (a, b) in enumerate(endpoints):
        nbr = tuple(neighbors.get(i, ()))
        boundary = len(nbr) == 1
        tag_u = BoundaryTag.GAMMA_C_U if boundary else BoundaryTag.INTERIOR
        tag_p = BoundaryTag.GAMMA_T_P if boundary else BoundaryTag.INTERIOR
        edges.append(
            Edge(
                id=i,
                endpoint_ids=(a, b),
                length=float(np.hypot(*(points[b] - points[a]))),
                neighbor_elements=nbr,
                outward_normals=tuple(normals.get(i, ())),
                u_tag=tag_u,
                p_tag=tag_p,
                side=_side_of(points[a], points[b]) if boundary else None,
            )
        )
    return Mesh(points=points, edges=tuple(edges), elements=tuple(elements), level=level)


def _cell_polygons(style: CutStyle) -> list[list[tuple[int, int]]]:
    # Lattice coordinates in units of a quarter cell.
    if style is CutStyle.CHEVRON:
        left = [(0, 0), (2, 0), (1, 2), (2, 4), (0, 4)]
        right = [(2, 0), (4, 0), (4, 4), (2, 4), (1, 2)]
    else:
        left = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 3), (2, 3), (2, 4), (0, 4)]
        right = [(2, 0), (4, 0), (4, 4), (2, 4), (2, 3), (1, 3), (1, 1), (2, 1)]
    return [left, right]


def build_nonconvex_grid(level: int, cut_style: CutStyle | str = CutStyle.CHEVRON) -> Mesh:
    """Unit square split into ``2**level`` squared cells, each cut into two polygons.

    Chevron: the cut runs from the bottom-edge midpoint through the point at
    (1/4, 1/2) of the cell to the top-edge midpoint, giving a non-convex left
    pentagon and a convex right pentagon.  StairL: a stepped cut giving two
    non-convex octagons.
    """
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)):
        raise ArgumentError(f"level must be an integer, got {level!r}")
    if not 1 <= level <= MAX_LEVEL:
        raise ArgumentError(f"level must lie in [1, {MAX_LEVEL}], got {level}")
    style = CutStyle(cut_style)
    n = 2**level
    scale = 1.0 / (4 * n)
    ids: dict[tuple[int, int], int] = {}
    coords: list[tuple[float, float]] = []

    def pid(ix: int, iy: int) -> int:
        if (ix, iy) not in ids:
            ids[(ix, iy)] = len(coords)
            coords.append((ix * scale, iy * scale))
        return ids[(ix, iy)]

    template = _cell_polygons(style)
    polygons = []
    for j in range(n):
        for i in range(n):
            for poly in template:
                polygons.append([pid(4 * i + a, 4 * j + b) for a, b in poly])
    return build_mesh(np.array(coords), polygons, level=int(level))


def validate_mesh(mesh: Mesh, domain_area: float | None = None) -> list[str]:
    """Return human-readable invariant violations; empty when the mesh is sound."""
    defects: list[str] = []
    for edge in mesh.edges:
        a, b = edge.endpoint_ids
        if not np.hypot(*(mesh.points[b] - mesh.points[a])) > 0.0:
            defects.append(f"edge {edge.id}: zero-length edge")
            continue
        nbr = edge.neighbor_elements
        interior_tags = edge.u_tag is BoundaryTag.INTERIOR and edge.p_tag is BoundaryTag.INTERIOR
        any_interior_tag = edge.u_tag is BoundaryTag.INTERIOR or edge.p_tag is BoundaryTag.INTERIOR
        if len(nbr) == 2 and not interior_tags:
            defects.append(f"edge {edge.id}: interior edge carries boundary tags")
        elif len(nbr) == 1 and any_interior_tag:
            defects.append(f"edge {edge.id}: boundary edge tagged Interior")
        elif len(nbr) not in (1, 2):
            defects.append(f"edge {edge.id}: has {len(nbr)} neighbours")
        problems = []
        t = mesh.points[b] - mesh.points[a]
        expected = np.array([t[1], -t[0]]) / np.hypot(*t)
        for el_id, n in zip(nbr, edge.outward_normals):
            el = mesh.elements[el_id]
            j = el.edge_ids.index(edge.id)
            sign = -1.0 if el.edge_reversed[j] else 1.0
            if not np.allclose(n, sign * expected, rtol=0.0, atol=1e-14):
                problems.append(f"normal for element {el_id} is not outward")
        if len(nbr) == 2 and not np.array_equal(edge.outward_normals[0], -edge.outward_normals[1]):
            problems.append("neighbour normals not opposite")
        if problems:
            defects.append(f"edge {edge.id}: " + "; ".join(problems))
    total = 0.0
    for el in mesh.elements:
        verts = mesh.element_vertices(el.id)
        area = signed_area(verts)
        total += area
        if not area > 0.0:
            defects.append(f"element {el.id}: non-positive area {area:.3e}")
        if not np.isclose(el.diameter, polygon_diameter(verts), rtol=1e-14, atol=0.0):
            defects.append(f"element {el.id}: diameter mismatch")
    if domain_area is None:
        domain_area = _boundary_area(mesh)
    if domain_area is not None and abs(total - domain_area) > 1e-12 * abs(domain_area):
        defects.append(f"mesh: element areas sum to {total!r}, domain area {domain_area!r}")
    return defects


def _boundary_area(mesh: Mesh) -> float | None:
    # Enclosed area from boundary edges, each traversed with the domain on its left.
    total = 0.0
    for edge in mesh.boundary_edges():
        el = mesh.elements[edge.neighbor_elements[0]]
        a, b = edge.endpoint_ids
        if el.edge_reversed[el.edge_ids.index(edge.id)]:
            a, b = b, a
        pa, pb = mesh.points[a], mesh.points[b]
        total += 0.5 * (pa[0] * pb[1] - pb[0] * pa[1])
    return total


# ---------------------------------------------------------------------------
# plain-text dump

def write_mesh(mesh: Mesh, path) -> None:
    lines = ["# wgbiot mesh", f"level {mesh.level}", f"points {len(mesh.points)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.points]
    lines.append(f"edges {mesh.n_edges}")
    for e in mesh.edges:
        lines.append(f"{e.endpoint_ids[0]} {e.endpoint_ids[1]} {e.u_tag.value} {e.p_tag.value} {e.side or '-'}")
    lines.append(f"elements {mesh.n_elements}")
    for el in mesh.elements:
        lines.append(" ".join(str(v) for v in (len(el.vertex_ids), *el.vertex_ids)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    it = iter(rows)

    def header(name: str) -> int:
        row = next(it)
        if row[0] != name:
            raise GeometryError(f"expected section {name!r}, found {row[0]!r}")
        return int(row[1])

    level = header("level")
    points = np.array([[float(v) for v in next(it)] for _ in range(header("points"))])
    edge_rows = [next(it) for _ in range(header("edges"))]
    polygons = []
    for _ in range(header("elements")):
        row = [int(v) for v in next(it)]
        polygons.append(row[1 : 1 + row[0]])
    mesh = build_mesh(points, polygons, level=level, edge_list=[(int(r[0]), int(r[1])) for r in edge_rows])
    edges = tuple(
        replace(e, u_tag=BoundaryTag(r[2]), p_tag=BoundaryTag(r[3]), side=None if r[4] == "-" else r[4])
        for e, r in zip(mesh.edges, edge_rows)
    )
    return replace(mesh, edges=edges)


def iter_element_edges(mesh: Mesh, el: PolygonalElement) -> Iterable[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(edge_id, start, end, outward_normal)`` in the global edge orientation."""
    verts = mesh.element_vertices(el.id)
    for j, i in enumerate(el.edge_ids):
        a, b = mesh.edge_endpoints(i)
        t = verts[(j + 1) % len(verts)] - verts[j]
        yield i, a, b, np.array([t[1], -t[0]]) / np.hypot(*t)
