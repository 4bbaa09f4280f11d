"""Point location and pointwise evaluation of weak fields.

Points inside an element take the interior polynomial of that element.  Points
lying on a boundary edge take the edge polynomial instead, so that sampled
Dirichlet data is reproduced exactly rather than up to the interior
approximation error.
"""

from __future__ import annotations

import numpy as np

from .assembly import Discretization
from .exceptions import GeometryError
from .mesh import BoundaryTag, Mesh
from .polybasis import EdgeBasis, eval_basis, eval_edge_basis
from .weakops import element_basis


def _on_segment(p, a, b, tol) -> bool:
    d = b - a
    L2 = float(d @ d)
    s = float((p - a) @ d) / L2
    if s < -tol or s > 1 + tol:
        return False
    return float(np.hypot(*(a + s * d - p))) <= tol * np.sqrt(L2)


def point_in_polygon(p: np.ndarray, verts: np.ndarray, tol: float = 1e-12) -> bool:
    """Crossing-number test; points on the boundary count as inside."""
    n = len(verts)
    inside = False
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        if _on_segment(p, a, b, tol):
            return True
        if (a[1] > p[1]) != (b[1] > p[1]):
            x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x > p[0]:
                inside = not inside
    return inside


class PointLocator:
    """Bucket grid over element bounding boxes."""

    def __init__(self, mesh: Mesh, n_buckets: int | None = None):
        self.mesh = mesh
        lo, hi = mesh.points.min(axis=0), mesh.points.max(axis=0)
        self.lo, self.span = lo, np.maximum(hi - lo, 1e-300)
        n = n_buckets or max(1, int(np.sqrt(mesh.n_elements)))
        self.n = n
        self.buckets: dict[tuple[int, int], list[int]] = {}
        for el in mesh.elements:
            v = mesh.element_vertices(el.id)
            i0, j0 = self._cell(v.min(axis=0))
            i1, j1 = self._cell(v.max(axis=0))
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    self.buckets.setdefault((i, j), []).append(el.id)

    def _cell(self, p) -> tuple[int, int]:
        c = np.floor((np.asarray(p) - self.lo) / self.span * self.n).astype(int)
        c = np.clip(c, 0, self.n - 1)
        return int(c[0]), int(c[1])

    def locate(self, p) -> int:
        p = np.asarray(p, dtype=float)
        for e in self.buckets.get(self._cell(p), []):
            if point_in_polygon(p, self.mesh.element_vertices(e)):
                return e
        raise GeometryError(f"point ({p[0]:.6g}, {p[1]:.6g}) lies in no element")


def _boundary_edges_at(mesh: Mesh, e: int, p: np.ndarray, tol: float = 1e-12) -> list[int]:
    hits = []
    for i in mesh.elements[e].edge_ids:
        if mesh.edges[i].is_boundary:
            a, b = mesh.edge_endpoints(i)
            if _on_segment(p, a, b, tol):
                hits.append(i)
    return hits


def _pick_edge(mesh: Mesh, hits: list[int], dirichlet_tag: BoundaryTag, attr: str) -> int:
    # at a domain corner the Dirichlet edge wins, so prescribed values are reported exactly
    for i in hits:
        if getattr(mesh.edges[i], attr) is dirichlet_tag:
            return i
    return hits[0]


def sample_fields(disc: Discretization, u: np.ndarray, p: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rows ``(x, y, u1, u2, p)`` for every sample point."""
    mesh, dm, k = disc.mesh, disc.dofmap, disc.k
    locator = PointLocator(mesh)
    out = np.zeros((len(points), 5))
    out[:, :2] = points
    n_p = dm.n_p

    def edge_values(edge, pt):
        a, b = mesh.edge_endpoints(edge)
        return eval_edge_basis(EdgeBasis(k, a, b), pt[None, :])[0], dm.edge_dofs(edge)

    for row, pt in enumerate(np.asarray(points, dtype=float)):
        e = locator.locate(pt)
        hits = _boundary_edges_at(mesh, e, pt)
        if not hits:
            phi = eval_basis(element_basis(mesh.element_vertices(e), k), pt)
            ids = dm.interior_dofs(e)
            phi_p, ids_p = phi, ids
        else:
            phi, ids = edge_values(_pick_edge(mesh, hits, BoundaryTag.GAMMA_C_U, "u_tag"), pt)
            phi_p, ids_p = edge_values(_pick_edge(mesh, hits, BoundaryTag.GAMMA_T_P, "p_tag"), pt)
        out[row, 2] = phi @ u[ids]
        out[row, 3] = phi @ u[n_p + ids]
        out[row, 4] = phi_p @ p[ids_p]
    return out


def uniform_grid(n: int = 101) -> np.ndarray:
    """``n x n`` points on the unit square, x varying fastest."""
    s = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(s, s)
    return np.column_stack([X.ravel(), Y.ravel()])
