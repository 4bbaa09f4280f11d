"""Quadrature on polygons (via ear clipping) and on straight edges."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .exceptions import ArgumentError, GeometryError

MAX_POLYGON_DEGREE = 40
MAX_EDGE_DEGREE = 60


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract the leading axis of ``values`` (sampled at ``points``) with the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def ear_clip(verts: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon; returns index triples into ``verts``.

    Collinear vertices are dropped (they only contribute zero-area triangles).
    """
    verts = np.asarray(verts, dtype=float)
    idx = list(range(len(verts)))
    scale = np.ptp(verts, axis=0).max() ** 2
    eps = 1e-14 * scale
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 4 * len(verts) ** 2:
            raise GeometryError("ear clipping failed: polygon is not simple")
        m = len(idx)
        clipped = False
        for pos in range(m):
            i0, i1, i2 = idx[pos - 1], idx[pos], idx[(pos + 1) % m]
            a, b, c = verts[i0], verts[i1], verts[i2]
            turn = _cross(a, b, c)
            if abs(turn) <= eps and np.dot(b - a, c - b) > 0:
                del idx[pos]
                clipped = True
                break
            if turn <= eps:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = verts[j]
                if _cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps and _cross(c, a, p) >= -eps:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                del idx[pos]
                clipped = True
                break
        if not clipped:
            raise GeometryError("ear clipping failed: polygon is not simple")
    if _cross(*verts[idx]) <= eps:
        raise GeometryError("ear clipping failed: degenerate final triangle")
    tris.append(tuple(idx))
    return tris


@lru_cache(maxsize=None)
def _reference_triangle(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the unit triangle, exact for total degree ``degree``."""
    n = degree // 2 + 1
    s, ws = roots_legendre(n)
    t, wt = roots_jacobi(n, 1.0, 0.0)  # weight (1 - t) absorbs the collapse Jacobian
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    t = 0.5 * (t + 1.0)
    wt = 0.25 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([(S * (1.0 - T)).ravel(), T.ravel()])
    return pts, W.ravel()


def triangle_rule(tri: np.ndarray, degree: int) -> QuadratureRule:
    ref_pts, ref_w = _reference_triangle(int(degree))
    a, b, c = np.asarray(tri, dtype=float)
    jac = np.column_stack([b - a, c - a])
    det = abs(np.linalg.det(jac))
    return QuadratureRule(a + ref_pts @ jac.T, ref_w * det, int(degree))


def polygon_rule(verts: np.ndarray, degree: int) -> QuadratureRule:
    """Positive-weight rule on a simple polygon, exact to total degree ``degree``."""
    if not 0 <= degree <= MAX_POLYGON_DEGREE:
        raise ArgumentError(f"polygon quadrature degree must be in [0, {MAX_POLYGON_DEGREE}]")
    verts = np.asarray(verts, dtype=float)
    pts, wts = [], []
    for tri in ear_clip(verts):
        rule = triangle_rule(verts[list(tri)], degree)
        pts.append(rule.points)
        wts.append(rule.weights)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), int(degree))


@lru_cache(maxsize=None)
def gauss_legendre(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] exact to ``degree``."""
    n = max(1, -(-(degree + 1) // 2))
    return roots_legendre(n)


def edge_rule(a, b, degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on the segment from ``a`` to ``b``; weights sum to its length."""
    if not 0 <= degree <= MAX_EDGE_DEGREE:
        raise ArgumentError(f"edge quadrature degree must be in [0, {MAX_EDGE_DEGREE}]")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s, w = gauss_legendre(int(degree))
    half = 0.5 * np.hypot(*(b - a))
    pts = 0.5 * (a + b) + np.outer(s, 0.5 * (b - a))
    return QuadratureRule(pts, w * half, int(degree))
