"""Global bilinear forms, load vectors and the per-step saddle-point system."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .dofspace import GlobalDofMap, build_dof_map
from .exceptions import ArgumentError, ScenarioError
from .mesh import BoundaryTag, Mesh
from .polybasis import dim_poly, eval_basis
from .quadrature import gauss_legendre, polygon_rule
from .weakops import LocalOperatorSet, RPolicy, choose_r, edge_gram, element_basis, local_operators, shape_key


@dataclass(frozen=True)
class MaterialParams:
    mu: float
    lam: float
    K: np.ndarray  # per element: shape (n,) scalars or (n, 2, 2) tensors

    def __post_init__(self):
        if not self.mu > 0:
            raise ArgumentError(f"mu must be positive, got {self.mu}")
        if not self.lam >= 0:
            raise ArgumentError(f"lambda must be non-negative, got {self.lam}")
        K = np.asarray(self.K, dtype=float)
        if K.ndim == 1 and not np.all(K > 0):
            raise ArgumentError("conductivity must be positive")
        if K.ndim == 3 and not np.all(np.linalg.eigvalsh(0.5 * (K + K.transpose(0, 2, 1))) > 0):
            raise ArgumentError("conductivity tensors must be SPD")
        object.__setattr__(self, "K", K)

    @staticmethod
    def lame(E: float, nu: float) -> tuple[float, float]:
        if not 0.0 < nu < 0.5:
            raise ArgumentError(f"Poisson ratio must lie in (0, 1/2), got {nu}")
        return E / (2.0 * (1.0 + nu)), nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @classmethod
    def from_young(cls, E: float, nu: float, K) -> "MaterialParams":
        mu, lam = cls.lame(E, nu)
        return cls(mu, lam, K)


def element_operators(mesh: Mesh, k: int, policy: RPolicy | str = RPolicy.THEORY) -> list[LocalOperatorSet]:
    return [
        local_operators(mesh.element_vertices(el.id), k, choose_r(el, k, policy), el.edge_reversed)
        for el in mesh.elements
    ]


def _scatter(blocks, rows, cols, shape) -> sp.csr_matrix:
    """Sum dense element blocks into a CSR matrix (duplicates add)."""
    I = np.concatenate([np.repeat(r, len(c)) for r, c in zip(rows, cols)])
    J = np.concatenate([np.tile(c, len(r)) for r, c in zip(rows, cols)])
    V = np.concatenate([np.asarray(b).ravel() for b in blocks])
    return sp.coo_matrix((V, (I, J)), shape=shape).tocsr()


def assemble_a(mesh: Mesh, dofmap: GlobalDofMap, ops, params: MaterialParams) -> sp.csr_matrix:
    blocks, ids = [], []
    for el, op in zip(mesh.elements, ops):
        blocks.append(2.0 * params.mu * op.strain_energy + params.lam * op.div_energy)
        ids.append(dofmap.element_u_dofs(el.id))
    return _scatter(blocks, ids, ids, (dofmap.n_u, dofmap.n_u))


def assemble_b(mesh: Mesh, dofmap: GlobalDofMap, ops) -> sp.csr_matrix:
    """``B[q, v] = (div_w v, q0)``; only interior pressure rows are non-zero."""
    blocks, rows, cols = [], [], []
    for el, op in zip(mesh.elements, ops):
        blocks.append(op.b_block)
        rows.append(dofmap.interior_dofs(el.id))
        cols.append(dofmap.element_u_dofs(el.id))
    return _scatter(blocks, rows, cols, (dofmap.n_p, dofmap.n_u))


def assemble_c(mesh: Mesh, dofmap: GlobalDofMap, ops, params: MaterialParams) -> sp.csr_matrix:
    blocks, ids = [], []
    for el, op in zip(mesh.elements, ops):
        blocks.append(op.flux_block(params.K[el.id]))
        ids.append(dofmap.element_dofs[el.id])
    return _scatter(blocks, ids, ids, (dofmap.n_p, dofmap.n_p))


class Discretization:
    """Mesh, DOF map, local operators and precomputed quadrature for one (mesh, k, r-policy).

    Element data terms use quadrature of degree ``2r + 2``; edge data use
    degree ``2k + 4``.
    """

    def __init__(self, mesh: Mesh, k: int, policy: RPolicy | str = RPolicy.THEORY):
        self.mesh = mesh
        self.k = int(k)
        self.policy = RPolicy(policy)
        self.dofmap = build_dof_map(mesh, k)
        self.ops = element_operators(mesh, k, self.policy)
        self.r = np.array([op.r for op in self.ops])
        self._build_element_quadrature()
        self._build_edge_quadrature()

    # quadrature tables ------------------------------------------------------
    def _build_element_quadrature(self):
        mesh, k, nk = self.mesh, self.k, dim_poly(self.k)
        cache: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        pts, rows, cols, vals, minv = [], [], [], [], []
        offset = 0
        for el, op in zip(mesh.elements, self.ops):
            verts = mesh.element_vertices(el.id)
            key = (shape_key(verts), op.r)
            if key not in cache:
                rule = polygon_rule(verts, 2 * op.r + 2)
                basis = element_basis(verts, k)
                wphi = eval_basis(basis, rule.points) * rule.weights[:, None]
                cache[key] = (rule.points - basis.center, wphi, np.linalg.inv(op.gram_k))
            rel, wphi, gk_inv = cache[key]
            nq = len(rel)
            pts.append(el.centroid + rel)
            rows.append(np.repeat(el.id * nk + np.arange(nk), nq))
            cols.append(np.tile(offset + np.arange(nq), nk))
            vals.append(wphi.T.ravel())
            minv.append(gk_inv)
            offset += nq
        self.qp = np.vstack(pts)
        n_int = mesh.n_elements * nk
        self.interior_load = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_int, offset)
        )
        self.interior_mass_inv = sp.block_diag(minv, format="csr")
        self.interior_mass = sp.block_diag([op.gram_k for op in self.ops], format="csr")

    def _build_edge_quadrature(self):
        mesh, k = self.mesh, self.k
        s, w = gauss_legendre(2 * k + 4)
        P = s[:, None] ** np.arange(k + 1)  # (nq, k+1)
        starts = mesh.points[[e.endpoint_ids[0] for e in mesh.edges]]
        ends = mesh.points[[e.endpoint_ids[1] for e in mesh.edges]]
        mid, half = 0.5 * (starts + ends), 0.5 * (ends - starts)
        self.eq = (mid[:, None, :] + s[None, :, None] * half[:, None, :]).reshape(-1, 2)
        self.edge_lengths = np.array([e.length for e in mesh.edges])
        self._edge_w = w
        self._edge_P = P
        self._edge_proj = np.linalg.solve(edge_gram(k, 2.0), (P * w[:, None]).T)  # (k+1, nq)

    # projections -------------------------------------------------------------
    def _eval(self, field, pts, t):
        try:
            if t is None:
                return np.asarray(field(pts[:, 0], pts[:, 1]), dtype=float)
            return np.asarray(field(pts[:, 0], pts[:, 1], t), dtype=float)
        except Exception as exc:
            raise ScenarioError(f"field evaluation failed: {exc}") from exc

    def project_scalar(self, field, t=None) -> np.ndarray:
        """``Q_h`` of a scalar field ``field(x, y[, t])`` as a global scalar-space vector."""
        vi = np.broadcast_to(self._eval(field, self.qp, t), (len(self.qp),))
        ve = np.broadcast_to(self._eval(field, self.eq, t), (len(self.eq),))
        interior = self.interior_mass_inv @ (self.interior_load @ vi)
        edges = (ve.reshape(self.mesh.n_edges, -1) @ self._edge_proj.T).ravel()
        return np.concatenate([interior, edges])

    def project_vector(self, field, t=None) -> np.ndarray:
        vi = self._eval(field, self.qp, t)
        ve = self._eval(field, self.eq, t)
        out = []
        for c in range(2):
            ci = np.broadcast_to(vi[c], (len(self.qp),))
            ce = np.broadcast_to(ve[c], (len(self.eq),))
            out.append(self.interior_mass_inv @ (self.interior_load @ ci))
            out.append((ce.reshape(self.mesh.n_edges, -1) @ self._edge_proj.T).ravel())
        return np.concatenate(out)

    # forms -------------------------------------------------------------------
    def assemble(self, params: MaterialParams) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        return (
            assemble_a(self.mesh, self.dofmap, self.ops, params),
            assemble_b(self.mesh, self.dofmap, self.ops),
            assemble_c(self.mesh, self.dofmap, self.ops, params),
        )

    @cached_property
    def n_interior_p(self) -> int:
        return self.mesh.n_elements * dim_poly(self.k)


def assemble_loads(disc: Discretization, f=None, g=None, beta=None, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides ``((f, v0) + <beta, vb>_{GammaT_u}, (g, q0))`` at time ``t``.

    ``f`` and ``beta`` return ``(2, n)`` arrays, ``g`` an ``(n,)`` array; all
    take ``(x, y, t)``.
    """
    dm = disc.dofmap
    rhs_u = np.zeros(dm.n_u)
    rhs_p = np.zeros(dm.n_p)
    n_int = disc.n_interior_p
    if f is not None:
        vals = disc._eval(f, disc.qp, t)
        for c in range(2):
            rhs_u[c * dm.n_p : c * dm.n_p + n_int] = disc.interior_load @ np.broadcast_to(vals[c], (len(disc.qp),))
    if g is not None:
        vals = np.broadcast_to(disc._eval(g, disc.qp, t), (len(disc.qp),))
        rhs_p[:n_int] = disc.interior_load @ vals
    if beta is not None:
        traction = [e.id for e in disc.mesh.edges if e.is_boundary and e.u_tag is BoundaryTag.GAMMA_T_U]
        if traction:
            nq = len(disc._edge_w)
            pts = disc.eq.reshape(disc.mesh.n_edges, nq, 2)[traction].reshape(-1, 2)
            vals = disc._eval(beta, pts, t).reshape(2, len(traction), nq)
            wl = disc._edge_w[None, :] * 0.5 * disc.edge_lengths[traction][:, None]
            for c in range(2):
                moments = (vals[c] * wl) @ disc._edge_P  # (n_traction, k+1)
                for i, m in zip(traction, moments):
                    rhs_u[c * dm.n_p + dm.edge_dofs(i)] += m
    return rhs_u, rhs_p


@dataclass(frozen=True)
class SaddleSystem:
    """Free-DOF blocks of ``[[A, -B^T], [-B, -dt C]] [u; p] = [rhs_u; rhs_p]``."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    dt: float
    dofmap: GlobalDofMap
    key: tuple | None = None  # identifies the matrix for factorization reuse

    def matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.A, -self.B.T], [-self.B, -self.dt * self.C]], format="csc")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_u, self.rhs_p])

    def expand(self, u_free: np.ndarray, p_free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Re-insert prescribed values; returns full-length coefficient vectors."""
        dm = self.dofmap
        u = np.zeros(dm.n_u)
        p = np.zeros(dm.n_p)
        u[dm.free_u] = u_free
        u[dm.constrained_u] = dm.values_u
        p[dm.free_p] = p_free
        p[dm.constrained_p] = dm.values_p
        return u, p


def build_step_system(
    A, B, C, rhs_u, g_load, u_prev, dt: float, dofmap: GlobalDofMap, key: tuple | None = None
) -> SaddleSystem:
    """One backward-Euler step with Dirichlet elimination.

    Second block row: ``-B u - dt C p = dt (g_n, q0) - B u_prev``.
    """
    if not dt > 0:
        raise ArgumentError(f"time step must be positive, got {dt}")
    fu, cu = dofmap.free_u, dofmap.constrained_u
    fp, cp = dofmap.free_p, dofmap.constrained_p
    xu, xp = dofmap.values_u, dofmap.values_p
    rhs_p = dt * g_load - B @ u_prev
    A, B, C = sp.csr_matrix(A), sp.csr_matrix(B), sp.csr_matrix(C)
    Bt = B.T.tocsr()
    ru = rhs_u[fu] - A[fu][:, cu] @ xu + Bt[fu][:, cp] @ xp
    rp = rhs_p[fp] + B[fp][:, cu] @ xu + dt * (C[fp][:, cp] @ xp)
    if key is not None:
        key = (*key, float(dt), cu.tobytes(), cp.tobytes())
    return SaddleSystem(A[fu][:, fu], B[fp][:, fu], C[fp][:, fp], ru, rp, float(dt), dofmap, key)


def export_triplets(M, path) -> None:
    """Write ``row col value`` lines (value at 17 significant digits) for diffing."""
    coo = sp.coo_matrix(M)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")
