"""Scaled monomial bases on polygons and on edges."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .exceptions import ConditioningError
from .quadrature import QuadratureRule


def dim_poly(r: int) -> int:
    return (r + 1) * (r + 2) // 2


@lru_cache(maxsize=None)
def exponents(r: int) -> np.ndarray:
    """Graded-lex exponent pairs: 1, x, y, x^2, xy, y^2, ..."""
    return np.array([(d - b, b) for d in range(r + 1) for b in range(d + 1)], dtype=int)


@dataclass(frozen=True)
class ElementBasis:
    """Monomials ((x - xc)/h)^a ((y - yc)/h)^b with a + b <= degree."""

    degree: int
    center: np.ndarray
    scale: float

    @property
    def dim(self) -> int:
        return dim_poly(self.degree)


@dataclass(frozen=True)
class EdgeBasis:
    """Powers s^j of the affine parameter s in [-1, 1] running from ``start`` to ``end``."""

    degree: int
    start: np.ndarray
    end: np.ndarray

    @property
    def dim(self) -> int:
        return self.degree + 1

    def parameter(self, pts: np.ndarray) -> np.ndarray:
        d = self.end - self.start
        mid = 0.5 * (self.start + self.end)
        return 2.0 * ((np.atleast_2d(pts) - mid) @ d) / (d @ d)


def _powers(z: np.ndarray, r: int) -> np.ndarray:
    # z: (n,), returns (n, r + 1) with column j = z**j
    out = np.ones((z.shape[0], r + 1))
    for j in range(1, r + 1):
        out[:, j] = out[:, j - 1] * z
    return out


def eval_basis(basis: ElementBasis, p) -> np.ndarray:
    """Monomial values at ``p``: shape ``(dim,)`` for one point, ``(n, dim)`` for many."""
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    z = (pts - basis.center) / basis.scale
    e = exponents(basis.degree)
    px, py = _powers(z[:, 0], basis.degree), _powers(z[:, 1], basis.degree)
    vals = px[:, e[:, 0]] * py[:, e[:, 1]]
    return vals[0] if single else vals


def eval_grad(basis: ElementBasis, p) -> np.ndarray:
    """Gradients, shape ``(dim, 2)`` for one point or ``(n, dim, 2)``."""
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    r = basis.degree
    z = (pts - basis.center) / basis.scale
    e = exponents(r)
    px, py = _powers(z[:, 0], r), _powers(z[:, 1], r)
    a, b = e[:, 0], e[:, 1]
    dpx = np.zeros_like(px)
    dpy = np.zeros_like(py)
    dpx[:, 1:] = px[:, :-1] * np.arange(1, r + 1)
    dpy[:, 1:] = py[:, :-1] * np.arange(1, r + 1)
    g = np.empty((pts.shape[0], len(e), 2))
    g[:, :, 0] = dpx[:, a] * py[:, b] / basis.scale
    g[:, :, 1] = px[:, a] * dpy[:, b] / basis.scale
    return g[0] if single else g


def eval_edge_basis(basis: EdgeBasis, pts) -> np.ndarray:
    return _powers(basis.parameter(pts), basis.degree)


def gram_matrix(basis: ElementBasis, quad: QuadratureRule, other: ElementBasis | None = None) -> np.ndarray:
    """``G[i, j] = (m_i, n_j)_T``; with ``other`` omitted this is the (symmetric) Gram matrix."""
    phi = eval_basis(basis, quad.points)
    psi = phi if other is None else eval_basis(other, quad.points)
    G = (phi * quad.weights[:, None]).T @ psi
    if other is None:
        G = 0.5 * (G + G.T)
    return G


class GramSolver:
    """Cached factorization of an SPD Gram matrix.

    Cholesky first; a pivoted symmetric-indefinite solve is the fallback for
    matrices that lost definiteness to rounding.
    """

    def __init__(self, G: np.ndarray, label: str = "element"):
        self.G = G
        self.label = label
        d = np.sqrt(np.diag(G))
        if not np.all(d > 0):
            raise ConditioningError(f"Gram matrix of {label} has a non-positive diagonal")
        # symmetric diagonal scaling keeps the conditioning estimate meaningful
        self._d = d
        Gs = G / np.outer(d, d)
        self._chol = None
        try:
            self._chol = sla.cho_factor(Gs, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            pass
        self._Gs = Gs
        rcond = 1.0 / np.linalg.cond(Gs) if len(G) > 1 else 1.0
        if not rcond > 1e3 * np.finfo(float).eps:
            raise ConditioningError(
                f"Gram matrix of {label} is singular to machine precision (rcond {rcond:.2e})"
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        b = rhs / self._d.reshape((-1,) + (1,) * (rhs.ndim - 1))
        if self._chol is not None:
            x = sla.cho_solve(self._chol, b, check_finite=False)
        else:
            x = sla.solve(self._Gs, b, assume_a="sym", check_finite=False)
        return x / self._d.reshape((-1,) + (1,) * (rhs.ndim - 1))
