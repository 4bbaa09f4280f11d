"""Element-local discrete weak operators and L2 projections.

A local weak function is ``{v0, vb}`` with ``v0`` in P_k(T) and ``vb`` in
P_k(e) on every edge.  Scalar local DOFs are ordered as the graded-lex
interior modes followed by ``k + 1`` modes per edge in element-local edge
order; displacement DOFs stack the x-component block on the y-component block.

All weak operators come out of one pair of right-hand-side matrices::

    Rx[i, :] = -(q0, d/dx m_i)_T + <qb, m_i n_x>_dT
    Ry[i, :] = -(q0, d/dy m_i)_T + <qb, m_i n_y>_dT

for the degree-r test monomials ``m_i``: the scalar weak gradient is
``G^{-1} [Rx; Ry]`` and the vector weak gradient, divergence and strain are
block recombinations of it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import PolygonalElement, polygon_centroid, polygon_diameter
from .polybasis import (
    EdgeBasis,
    ElementBasis,
    GramSolver,
    dim_poly,
    eval_basis,
    eval_edge_basis,
    eval_grad,
    gram_matrix,
)
from .quadrature import edge_rule, polygon_rule
from .exceptions import ArgumentError


class RPolicy(str, enum.Enum):
    THEORY = "Theory"
    FIXED_PLUS1 = "FixedPlus1"
    FIXED_PLUS2 = "FixedPlus2"


def choose_r(element: PolygonalElement, k: int, policy: RPolicy | str = RPolicy.THEORY) -> int:
    """Degree of the weak-operator polynomial space on ``element``."""
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    policy = RPolicy(policy)
    if policy is RPolicy.FIXED_PLUS1:
        return k + 1
    if policy is RPolicy.FIXED_PLUS2:
        return k + 2
    N = element.num_edges
    return k - 1 + (N if element.is_convex else 2 * N)


@dataclass(frozen=True)
class LocalDofLayout:
    k: int
    n_edges: int

    @property
    def n_interior(self) -> int:
        return dim_poly(self.k)

    @property
    def n_edge(self) -> int:
        return self.k + 1

    @property
    def n_scalar(self) -> int:
        return self.n_interior + self.n_edges * self.n_edge

    @property
    def n_vector(self) -> int:
        return 2 * self.n_scalar

    def edge_slice(self, j: int) -> slice:
        start = self.n_interior + j * self.n_edge
        return slice(start, start + self.n_edge)


@dataclass(frozen=True)
class LocalOperatorSet:
    """Weak operators of one element, as matrices acting on local DOF vectors.

    Tensor rows of ``grad_u`` are ordered (xx, xy, yx, yy) with
    ``(grad v)_ij = d v_i / d x_j``; ``strain_u`` rows are (xx, yy, xy).
    """

    layout: LocalDofLayout
    r: int
    gram: np.ndarray  # P_r Gram
    gram_k: np.ndarray  # P_k Gram
    cross_kr: np.ndarray  # (P_k test, P_r trial)
    rhs_x: np.ndarray
    rhs_y: np.ndarray
    grad_x: np.ndarray  # scalar weak gradient, x component (n_r x n_scalar)
    grad_y: np.ndarray

    @property
    def n_r(self) -> int:
        return dim_poly(self.r)

    @cached_property
    def grad_p(self) -> np.ndarray:
        return np.vstack([self.grad_x, self.grad_y])

    @cached_property
    def grad_u(self) -> np.ndarray:
        Z = np.zeros_like(self.grad_x)
        return np.block([[self.grad_x, Z], [self.grad_y, Z], [Z, self.grad_x], [Z, self.grad_y]])

    @cached_property
    def div_u(self) -> np.ndarray:
        return np.hstack([self.grad_x, self.grad_y])

    @cached_property
    def strain_u(self) -> np.ndarray:
        Z = np.zeros_like(self.grad_x)
        return np.block([[self.grad_x, Z], [Z, self.grad_y], [0.5 * self.grad_y, 0.5 * self.grad_x]])

    # quadratic forms -----------------------------------------------------
    @cached_property
    def h_xx(self) -> np.ndarray:
        return _sym(self.rhs_x.T @ self.grad_x)

    @cached_property
    def h_yy(self) -> np.ndarray:
        return _sym(self.rhs_y.T @ self.grad_y)

    @cached_property
    def h_xy(self) -> np.ndarray:
        """``(grad_x q)^T G (grad_y p)``; its transpose is the yx block."""
        return self.rhs_x.T @ self.grad_y

    @cached_property
    def strain_energy(self) -> np.ndarray:
        """Matrix of ``(eps_w u, eps_w v)_T`` (without the factor 2 mu)."""
        hxx, hyy, hxy = self.h_xx, self.h_yy, self.h_xy
        return _sym(np.block([[hxx + 0.5 * hyy, 0.5 * hxy.T], [0.5 * hxy, hyy + 0.5 * hxx]]))

    @cached_property
    def div_energy(self) -> np.ndarray:
        """Matrix of ``(div_w u, div_w v)_T``."""
        return _sym(np.block([[self.h_xx, self.h_xy], [self.h_xy.T, self.h_yy]]))

    @cached_property
    def grad_energy_p(self) -> np.ndarray:
        return self.h_xx + self.h_yy

    @cached_property
    def grad_energy_u(self) -> np.ndarray:
        H = self.grad_energy_p
        Z = np.zeros_like(H)
        return np.block([[H, Z], [Z, H]])

    @cached_property
    def b_block(self) -> np.ndarray:
        """``(div_w v, q0)_T`` as an (n_interior x n_vector) matrix."""
        return self.cross_kr @ self.div_u

    def flux_block(self, K: np.ndarray | float) -> np.ndarray:
        """``(K grad_w p, grad_w q)_T`` for a constant scalar or 2x2 conductivity."""
        K = np.asarray(K, dtype=float)
        if K.ndim == 0:
            return float(K) * self.grad_energy_p
        return _sym(K[0, 0] * self.h_xx + K[1, 1] * self.h_yy + K[0, 1] * self.h_xy + K[1, 0] * self.h_xy.T)


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def element_basis(verts: np.ndarray, degree: int) -> ElementBasis:
    verts = np.asarray(verts, dtype=float)
    return ElementBasis(degree, polygon_centroid(verts), polygon_diameter(verts))


def edge_bases(verts: np.ndarray, k: int, edge_reversed=None) -> list[EdgeBasis]:
    n = len(verts)
    if edge_reversed is None:
        edge_reversed = (False,) * n
    out = []
    for j in range(n):
        a, b = verts[j], verts[(j + 1) % n]
        out.append(EdgeBasis(k, b, a) if edge_reversed[j] else EdgeBasis(k, a, b))
    return out


def compute_local_operators(verts, k: int, r: int, edge_reversed=None) -> LocalOperatorSet:
    """Assemble and solve the defining problems of the weak operators on one polygon.

    The operators are translation invariant, so the work is done in the
    centroid frame; this avoids cancellation for small elements far from the
    origin.
    """
    verts = np.asarray(verts, dtype=float)
    verts = verts - polygon_centroid(verts)
    n = len(verts)
    layout = LocalDofLayout(k, n)
    bk = element_basis(verts, k)
    br = ElementBasis(r, bk.center, bk.scale)
    quad = polygon_rule(verts, 2 * r)
    G = gram_matrix(br, quad)
    Gk = gram_matrix(bk, quad)
    Mkr = gram_matrix(bk, quad, other=br)

    phi_k = eval_basis(bk, quad.points)  # (nq, nk)
    dm = eval_grad(br, quad.points)  # (nq, nr, 2)
    w = quad.weights
    Rx = np.zeros((br.dim, layout.n_scalar))
    Ry = np.zeros_like(Rx)
    Rx[:, : layout.n_interior] = -np.einsum("q,qi,qa->ia", w, dm[:, :, 0], phi_k)
    Ry[:, : layout.n_interior] = -np.einsum("q,qi,qa->ia", w, dm[:, :, 1], phi_k)

    for j, eb in enumerate(edge_bases(verts, k, edge_reversed)):
        a, b = verts[j], verts[(j + 1) % n]
        t = b - a
        normal = np.array([t[1], -t[0]]) / np.hypot(*t)
        rule = edge_rule(a, b, r + k)
        m = eval_basis(br, rule.points)  # (nq, nr)
        phi = eval_edge_basis(eb, rule.points)  # (nq, k+1)
        block = (m * rule.weights[:, None]).T @ phi
        sl = layout.edge_slice(j)
        Rx[:, sl] += normal[0] * block
        Ry[:, sl] += normal[1] * block

    solver = GramSolver(G, label=f"polygon with {n} edges (r={r})")
    gx = solver.solve(Rx)
    gy = solver.solve(Ry)
    return LocalOperatorSet(layout, r, G, Gk, Mkr, Rx, Ry, gx, gy)


_OPERATOR_CACHE: dict[tuple, LocalOperatorSet] = {}


def shape_key(verts: np.ndarray) -> tuple:
    verts = np.asarray(verts, dtype=float)
    rel = verts - verts.mean(axis=0)
    return tuple(np.round(rel.ravel(), 13).tolist())


def local_operators(verts, k: int, r: int, edge_reversed=None) -> LocalOperatorSet:
    """Shape-cached ``compute_local_operators``; translated copies share one entry."""
    flips = tuple(bool(f) for f in edge_reversed) if edge_reversed is not None else (False,) * len(verts)
    key = (shape_key(verts), flips, k, r)
    ops = _OPERATOR_CACHE.get(key)
    if ops is None:
        ops = compute_local_operators(verts, k, r, flips)
        _OPERATOR_CACHE[key] = ops
    return ops


def clear_operator_cache() -> None:
    _OPERATOR_CACHE.clear()


def weak_gradient_matrix(verts, k: int, r: int, edge_reversed=None) -> np.ndarray:
    return local_operators(verts, k, r, edge_reversed).grad_u


def weak_divergence_matrix(verts, k: int, r: int, edge_reversed=None) -> np.ndarray:
    return local_operators(verts, k, r, edge_reversed).div_u


def weak_strain_matrix(verts, k: int, r: int, edge_reversed=None) -> np.ndarray:
    return local_operators(verts, k, r, edge_reversed).strain_u


def scalar_weak_gradient_matrix(verts, k: int, r: int, edge_reversed=None) -> np.ndarray:
    return local_operators(verts, k, r, edge_reversed).grad_p


# ---------------------------------------------------------------------------
# L2 projections

def _project_element(verts, degree: int, f, quad_degree: int | None) -> np.ndarray:
    basis = element_basis(verts, degree)
    quad = polygon_rule(verts, quad_degree if quad_degree is not None else 2 * degree + 4)
    phi = eval_basis(basis, quad.points)
    vals = np.asarray(f(quad.points[:, 0], quad.points[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, quad.weights.shape)
    rhs = phi.T @ (quad.weights * vals)
    G = (phi * quad.weights[:, None]).T @ phi
    return GramSolver(_sym(G)).solve(rhs)


def project_interior(verts, k: int, f, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``f(x, y)`` onto P_k of the polygon."""
    return _project_element(verts, k, f, quad_degree)


def project_highorder(verts, r: int, f, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``f`` onto P_r, the weak-operator space."""
    return _project_element(verts, r, f, quad_degree)


def edge_gram(k: int, length: float) -> np.ndarray:
    s_pow = np.arange(2 * k + 1)
    moments = np.where(s_pow % 2 == 0, 2.0 / (s_pow + 1), 0.0) * 0.5 * length
    i = np.arange(k + 1)
    return moments[i[:, None] + i[None, :]]


def project_edge(start, end, k: int, f, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients in the s^j edge basis of the L2 projection of ``f`` onto P_k(e).

    The default rule (degree 2k + 12) resolves smooth boundary data to
    rounding level on the coarsest edges; 1D points are cheap.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    rule = edge_rule(start, end, quad_degree if quad_degree is not None else 2 * k + 12)
    phi = eval_edge_basis(EdgeBasis(k, start, end), rule.points)
    vals = np.asarray(f(rule.points[:, 0], rule.points[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, rule.weights.shape)
    rhs = phi.T @ (rule.weights * vals)
    return np.linalg.solve(edge_gram(k, float(np.hypot(*(end - start)))), rhs)
