"""Shared oracles for the test suite."""

from __future__ import annotations

import numpy as np

from wgbiot.mesh import build_mesh, polygon_centroid
from wgbiot.polybasis import EdgeBasis, eval_basis, eval_edge_basis, eval_grad
from wgbiot.quadrature import edge_rule, polygon_rule
from wgbiot.weakops import edge_bases, element_basis, project_edge

CHEVRON_LEFT = np.array([(0, 0), (2, 0), (1, 2), (2, 4), (0, 4)], dtype=float) / 4.0
CHEVRON_RIGHT = np.array([(2, 0), (4, 0), (4, 4), (2, 4), (1, 2)], dtype=float) / 4.0
UNIT_SQUARE = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
L_HEXAGON = np.array([(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)])


def star_polygon(rng: np.random.Generator, n: int, scale: float = 1.0, offset=(0.0, 0.0)) -> np.ndarray:
    """Random shape-regular CCW polygon, star-shaped about the origin, often non-convex."""
    gaps = rng.uniform(0.7, 1.3, size=n)
    angles = np.cumsum(gaps) / gaps.sum() * 2 * np.pi
    radii = rng.uniform(0.5, 1.0, size=n)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return scale * pts + np.asarray(offset, dtype=float)


def single_element_mesh(verts):
    verts = np.asarray(verts, dtype=float)
    return build_mesh(verts, [list(range(len(verts)))], level=0)


def poly_eval(coeffs, basis, pts):
    return eval_basis(basis, pts) @ coeffs


def local_projection(verts, k, coeffs_x, coeffs_y=None, edge_reversed=None):
    """Local Q_h DOF vector of a polynomial given by P_k coefficients (scalar or vector)."""
    bk = element_basis(verts, k)
    n = len(verts)

    def scalar(c):
        parts = [np.asarray(c, dtype=float)]
        for eb in edge_bases(verts, k, edge_reversed):
            parts.append(project_edge(eb.start, eb.end, k, lambda x, y: poly_eval(c, bk, np.column_stack([x, y]))))
        return np.concatenate(parts)

    if coeffs_y is None:
        return scalar(coeffs_x)
    return np.concatenate([scalar(coeffs_x), scalar(coeffs_y)])


def l2_poly_norm(coeffs, gram) -> float:
    """L2 norm on the element of the polynomial with the given coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    return float(np.sqrt(max(coeffs @ gram @ coeffs, 0.0)))


def fit_to_basis(values_fn, basis, verts, degree):
    """L2 projection onto ``basis`` with an over-resolved rule (an independent oracle)."""
    quad = polygon_rule(verts, degree)
    phi = eval_basis(basis, quad.points)
    G = (phi * quad.weights[:, None]).T @ phi
    return np.linalg.solve(G, phi.T @ (quad.weights * values_fn(quad.points)))


def defining_rhs_oracle(verts, k, r, edge_reversed=None, extra: int = 6):
    """``-(q0, d m_i) + <qb, m_i n>`` for every scalar local DOF, by brute-force quadrature.

    Uses a finer quadrature than the production code so it exercises the
    assembly independently.
    """
    verts = np.asarray(verts, dtype=float)
    bk = element_basis(verts, k)
    br = element_basis(verts, r)
    n = len(verts)
    nk = bk.dim
    ndof = nk + n * (k + 1)
    quad = polygon_rule(verts, r + k + extra)
    dm = eval_grad(br, quad.points)
    phi = eval_basis(bk, quad.points)
    Rx = np.zeros((br.dim, ndof))
    Ry = np.zeros_like(Rx)
    Rx[:, :nk] = -(dm[:, :, 0] * quad.weights[:, None]).T @ phi
    Ry[:, :nk] = -(dm[:, :, 1] * quad.weights[:, None]).T @ phi
    for j, eb in enumerate(edge_bases(verts, k, edge_reversed)):
        a, b = verts[j], verts[(j + 1) % n]
        t = b - a
        nrm = np.array([t[1], -t[0]]) / np.hypot(*t)
        rule = edge_rule(a, b, r + k + extra)
        blk = (eval_basis(br, rule.points) * rule.weights[:, None]).T @ eval_edge_basis(eb, rule.points)
        sl = slice(nk + j * (k + 1), nk + (j + 1) * (k + 1))
        Rx[:, sl] += nrm[0] * blk
        Ry[:, sl] += nrm[1] * blk
    return Rx, Ry
