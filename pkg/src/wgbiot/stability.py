"""Discrete stability constants computed by dense generalized eigenproblems.

Meant for small meshes (a few thousand unknowns); they back the property
checks rather than production runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dofspace import constrain_dirichlet
from .errors import discrete_h1_matrices


def _free_sets(problem):
    sc, disc = problem.scenario, problem.disc
    dm = constrain_dirichlet(disc.dofmap, disc.mesh, sc.u_dirichlet, sc.p_dirichlet, 0.0)
    return dm.free_u, dm.free_p


def _dense(M, rows, cols=None):
    cols = rows if cols is None else cols
    return M.tocsr()[rows][:, cols].toarray()


def a_extreme_eigenvalues(problem) -> tuple[float, float]:
    """Smallest and largest eigenvalue of ``A`` on the free displacement DOFs."""
    fu, _ = _free_sets(problem)
    ev = np.linalg.eigvalsh(_dense(problem.A, fu))
    return float(ev[0]), float(ev[-1])


def inf_sup_constant(problem) -> float:
    """``inf_q sup_v b(v, q) / (|||v||| |q0|)`` over interior pressures.

    Constant pressures are quotiented out when the displacement is clamped on
    the whole boundary, since then ``b(v, 1) = 0`` for every admissible ``v``.
    """
    disc = problem.disc
    fu, _ = _free_sets(problem)
    n_int = disc.n_interior_p
    A = _dense(problem.A, fu)
    B = problem.B.tocsr()[:n_int][:, fu].toarray()
    M = disc.interior_mass.toarray()
    S = B @ sla.solve(A, B.T, assume_a="pos")
    one = np.zeros(n_int)
    one[:: disc.dofmap.n_interior] = 1.0  # the constant monomial of every element
    if np.linalg.norm(B.T @ one) <= 1e-10 * np.linalg.norm(B) * np.linalg.norm(one):
        Z = sla.null_space((M @ one)[None, :])
        S, M = Z.T @ S @ Z, Z.T @ M @ Z
    ev = sla.eigh(S, M, eigvals_only=True)
    return float(np.sqrt(max(ev[0], 0.0)))


@dataclass(frozen=True)
class NormBounds:
    """Extreme ratios ``|||v|||^2 / |v|_{1,h}^2`` for displacement and pressure."""

    u_min: float
    u_max: float
    p_min: float
    p_max: float


def norm_equivalence(problem) -> NormBounds:
    disc, params = problem.disc, problem.params
    fu, fp = _free_sets(problem)
    Hu, Hp = discrete_h1_matrices(disc, params)
    eu = sla.eigh(_dense(problem.A, fu), _dense(Hu, fu), eigvals_only=True)
    ep = sla.eigh(_dense(problem.C, fp), _dense(Hp, fp), eigvals_only=True)
    return NormBounds(float(eu[0]), float(eu[-1]), float(ep[0]), float(ep[-1]))


@dataclass(frozen=True)
class RatioSample:
    """Range of ``|||v||| / |v|_{1,h}`` over random fields, for u and for p."""

    u: tuple[float, float]
    p: tuple[float, float]


def norm_ratio_sample(problem, n_samples: int = 100, seed: int = 0) -> RatioSample:
    """Energy-to-discrete-H1 ratios of ``n_samples`` random fields with zero Dirichlet values."""
    disc, params = problem.disc, problem.params
    fu, fp = _free_sets(problem)
    Hu, Hp = discrete_h1_matrices(disc, params)
    rng = np.random.default_rng(seed)

    def ratios(E, H, free, n):
        X = np.zeros((n, n_samples))
        X[free] = rng.standard_normal((len(free), n_samples))
        num = np.einsum("is,is->s", X, E @ X)
        den = np.einsum("is,is->s", X, H @ X)
        r = np.sqrt(num / den)
        return float(r.min()), float(r.max())

    dm = disc.dofmap
    return RatioSample(ratios(problem.A, Hu, fu, dm.n_u), ratios(problem.C, Hp, fp, dm.n_p))
