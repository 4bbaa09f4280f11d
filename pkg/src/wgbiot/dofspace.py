"""Global degree-of-freedom numbering and Dirichlet data.

One scalar weak space is numbered first: ``dim P_k`` interior modes per element
(elements in id order), then ``k + 1`` modes per edge (edges in id order, in
the edge's own orientation).  Pressure uses that numbering directly;
displacement component ``c`` lives at ``c * n_p + scalar_dof``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ScenarioError
from .mesh import BoundaryTag, Mesh
from .polybasis import dim_poly
from .weakops import project_edge


@dataclass(frozen=True)
class GlobalDofMap:
    k: int
    n_elements: int
    n_edges: int
    element_dofs: tuple[np.ndarray, ...]  # scalar local -> global, per element
    constrained_u: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    values_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constrained_p: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    values_p: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_interior(self) -> int:
        return dim_poly(self.k)

    @property
    def n_p(self) -> int:
        return self.n_elements * self.n_interior + self.n_edges * (self.k + 1)

    @property
    def n_u(self) -> int:
        return 2 * self.n_p

    def interior_dofs(self, e: int) -> np.ndarray:
        return e * self.n_interior + np.arange(self.n_interior)

    def edge_dofs(self, i: int) -> np.ndarray:
        return self.n_elements * self.n_interior + i * (self.k + 1) + np.arange(self.k + 1)

    def element_u_dofs(self, e: int) -> np.ndarray:
        d = self.element_dofs[e]
        return np.concatenate([d, d + self.n_p])

    @property
    def free_u(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_u), self.constrained_u)

    @property
    def free_p(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_p), self.constrained_p)

    def interior_p_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_p, dtype=bool)
        mask[: self.n_elements * self.n_interior] = True
        return mask


def build_dof_map(mesh: Mesh, k: int) -> GlobalDofMap:
    nk = dim_poly(k)
    base = mesh.n_elements * nk
    dofs = []
    for el in mesh.elements:
        parts = [el.id * nk + np.arange(nk)]
        parts += [base + i * (k + 1) + np.arange(k + 1) for i in el.edge_ids]
        dofs.append(np.concatenate(parts))
    return GlobalDofMap(k, mesh.n_elements, mesh.n_edges, tuple(dofs))


def _at_time(field, t):
    def f(x, y):
        try:
            return field(x, y, t)
        except Exception as exc:  # data callables are user supplied
            raise ScenarioError(f"failed to evaluate boundary data at t={t}: {exc}") from exc

    return f


def constrain_dirichlet(dofmap: GlobalDofMap, mesh: Mesh, u_data=None, p_data=None, t: float = 0.0) -> GlobalDofMap:
    """Fix displacement DOFs on GammaC_u edges and pressure DOFs on GammaT_p edges.

    Prescribed values are edge L2 projections of the data at time ``t``;
    absent data means homogeneous conditions.  ``u_data(x, y, t)`` returns a
    ``(2, n)`` array, ``p_data(x, y, t)`` an ``(n,)`` array.
    """
    k = dofmap.k
    cu, vu, cp, vp = [], [], [], []
    for edge in mesh.edges:
        if not edge.is_boundary:
            continue
        ids = dofmap.edge_dofs(edge.id)
        a, b = mesh.edge_endpoints(edge.id)
        if edge.u_tag is BoundaryTag.GAMMA_C_U:
            for c in range(2):
                cu.append(ids + c * dofmap.n_p)
                if u_data is None:
                    vu.append(np.zeros(k + 1))
                else:
                    g = _at_time(u_data, t)
                    vu.append(project_edge(a, b, k, lambda x, y, c=c: np.asarray(g(x, y))[c]))
        if edge.p_tag is BoundaryTag.GAMMA_T_P:
            cp.append(ids)
            vp.append(np.zeros(k + 1) if p_data is None else project_edge(a, b, k, _at_time(p_data, t)))

    def pack(ids, vals):
        if not ids:
            return np.zeros(0, dtype=int), np.zeros(0)
        ids = np.concatenate(ids)
        vals = np.concatenate(vals)
        order = np.argsort(ids, kind="stable")
        return ids[order], vals[order]

    cu_ids, cu_vals = pack(cu, vu)
    cp_ids, cp_vals = pack(cp, vp)
    return replace(dofmap, constrained_u=cu_ids, values_u=cu_vals, constrained_p=cp_ids, values_p=cp_vals)
