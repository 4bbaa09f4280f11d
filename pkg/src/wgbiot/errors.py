"""Discrete norms, errors against exact solutions and observed orders."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .assembly import Discretization, MaterialParams
from .exceptions import UnsupportedError
from .polybasis import eval_basis, eval_edge_basis, eval_grad
from .quadrature import edge_rule, polygon_rule
from .weakops import edge_bases, element_basis, shape_key


def _local(v: np.ndarray, disc: Discretization, e: int, vector: bool) -> np.ndarray:
    dm = disc.dofmap
    return v[dm.element_u_dofs(e) if vector else dm.element_dofs[e]]


def _quadratic(v, disc, vector: bool, mats) -> float:
    total = 0.0
    for e, M in enumerate(mats):
        x = _local(v, disc, e, vector)
        total += float(x @ M @ x)
    return math.sqrt(max(total, 0.0))


# The norms below are evaluated as pairings (R x) . (g x) of the defining
# right-hand side with the weak-operator output, which equals the Gram form
# (g x)^T G (g x) and matches how the element matrices are built.  Combined
# quantities (strain, divergence) are formed as vectors before pairing.
# Evaluating x^T M x with a pre-multiplied element matrix M gives the same
# value in exact arithmetic, but for fields near the kernel (rigid modes,
# constants) it returns the square root of rounding noise, about 1e-7 rather
# than 1e-15.

def _components(op, parts):
    """``(R, g)`` lists for d/dx and d/dy of every scalar part, in that order."""
    R = [r for x in parts for r in (op.rhs_x @ x, op.rhs_y @ x)]
    g = [c for x in parts for c in (op.grad_x @ x, op.grad_y @ x)]
    return R, g


def _pair(R, g, coeffs_a, coeffs_b=None) -> float:
    """Pairing of the linear combinations ``sum a_i comp_i`` and ``sum b_j comp_j``."""
    coeffs_b = coeffs_a if coeffs_b is None else coeffs_b
    ra = sum(c * R[i] for i, c in coeffs_a.items())
    ga = sum(c * g[i] for i, c in coeffs_a.items())
    rb = sum(c * R[i] for i, c in coeffs_b.items())
    gb = sum(c * g[i] for i, c in coeffs_b.items())
    return 0.5 * float(ra @ gb + rb @ ga)


def _operator_norm(v: np.ndarray, disc: Discretization, vector: bool, local_sq) -> float:
    total = 0.0
    for e, op in enumerate(disc.ops):
        x = _local(v, disc, e, vector)
        parts = np.split(x, 2) if vector else [x]
        total += local_sq(e, *_components(op, parts))
    return math.sqrt(max(total, 0.0))


# displacement components: 0 = d_x u1, 1 = d_y u1, 2 = d_x u2, 3 = d_y u2
_EXX, _EYY, _EXY, _DIV = {0: 1.0}, {3: 1.0}, {1: 0.5, 2: 0.5}, {0: 1.0, 3: 1.0}


def energy_norm_u(u: np.ndarray, disc: Discretization, params: MaterialParams) -> float:
    """``(sum_T 2 mu |eps_w u|^2 + lambda |div_w u|^2)^(1/2)``."""

    def local_sq(e, R, g):
        strain = _pair(R, g, _EXX) + _pair(R, g, _EYY) + 2.0 * _pair(R, g, _EXY)
        return 2.0 * params.mu * strain + params.lam * _pair(R, g, _DIV)

    return _operator_norm(u, disc, True, local_sq)


def energy_norm_p(p: np.ndarray, disc: Discretization, params: MaterialParams) -> float:
    """``(sum_T (K grad_w p, grad_w p)_T)^(1/2)``."""

    def local_sq(e, R, g):
        K = params.K[e]
        if np.ndim(K) == 0:
            return float(K) * (_pair(R, g, {0: 1.0}) + _pair(R, g, {1: 1.0}))
        return (
            K[0, 0] * _pair(R, g, {0: 1.0})
            + K[1, 1] * _pair(R, g, {1: 1.0})
            + (K[0, 1] + K[1, 0]) * _pair(R, g, {0: 1.0}, {1: 1.0})
        )

    return _operator_norm(p, disc, False, local_sq)


def _grad_sq(e, R, g) -> float:
    return sum(float(r @ c) for r, c in zip(R, g))


def weak_gradient_norm_u(u: np.ndarray, disc: Discretization) -> float:
    """``(sum_T |grad_w u|^2)^(1/2)``, the displacement column of the tables."""
    return _operator_norm(u, disc, True, _grad_sq)


def weak_gradient_norm_p(p: np.ndarray, disc: Discretization) -> float:
    return _operator_norm(p, disc, False, _grad_sq)


def l2_interior_norm(v: np.ndarray, disc: Discretization, n_components: int = 1) -> float:
    """L2 norm of the interior components only."""
    dm = disc.dofmap
    total = 0.0
    for c in range(n_components):
        x = v[c * dm.n_p : c * dm.n_p + disc.n_interior_p]
        total += float(x @ (disc.interior_mass @ x))
    return math.sqrt(total)


def weighted_norm(u, p, disc: Discretization, params: MaterialParams, dt: float) -> float:
    """``(|||u|||_V^2 + |p0|^2 + dt |||p|||_W^2)^(1/2)``; diagnostic only."""
    return math.sqrt(
        energy_norm_u(u, disc, params) ** 2 + l2_interior_norm(p, disc) ** 2 + dt * energy_norm_p(p, disc, params) ** 2
    )


# ---------------------------------------------------------------------------
# discrete H1 semi-norms built from v0 and the jump v0 - vb

_H1_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}


def _h1_blocks(disc: Discretization, e: int):
    """Per-element (gxx, gyy, gxy, jump) matrices on scalar local DOFs."""
    mesh, k = disc.mesh, disc.k
    el = mesh.elements[e]
    verts = mesh.element_vertices(e)
    key = (shape_key(verts), el.edge_reversed, k)
    if key in _H1_CACHE:
        return _H1_CACHE[key]
    basis = element_basis(verts, k)
    nk = basis.dim
    n = nk + len(verts) * (k + 1)
    quad = polygon_rule(verts, 2 * k)
    dg = eval_grad(basis, quad.points)
    w = quad.weights
    gxx, gyy, gxy = (np.zeros((n, n)) for _ in range(3))
    gxx[:nk, :nk] = np.einsum("q,qa,qb->ab", w, dg[:, :, 0], dg[:, :, 0])
    gyy[:nk, :nk] = np.einsum("q,qa,qb->ab", w, dg[:, :, 1], dg[:, :, 1])
    gxy[:nk, :nk] = np.einsum("q,qa,qb->ab", w, dg[:, :, 0], dg[:, :, 1])
    jump = np.zeros((n, n))
    for j, eb in enumerate(edge_bases(verts, k, el.edge_reversed)):
        rule = edge_rule(verts[j], verts[(j + 1) % len(verts)], 2 * k)
        J = np.zeros((len(rule.weights), n))
        J[:, :nk] = eval_basis(basis, rule.points)
        J[:, nk + j * (k + 1) : nk + (j + 1) * (k + 1)] = -eval_edge_basis(eb, rule.points)
        jump += (J * rule.weights[:, None]).T @ J
    out = (gxx, gyy, gxy, jump / el.diameter)
    _H1_CACHE[key] = out
    return out


def _h1_local_u(disc: Discretization, params: MaterialParams) -> list[np.ndarray]:
    mats = []
    for e in range(disc.mesh.n_elements):
        gxx, gyy, gxy, jump = _h1_blocks(disc, e)
        strain = np.block([[gxx + 0.5 * gyy, 0.5 * gxy.T], [0.5 * gxy, gyy + 0.5 * gxx]])
        div = np.block([[gxx, gxy], [gxy.T, gyy]])
        Z = np.zeros_like(jump)
        mats.append(2 * params.mu * strain + params.lam * div + np.block([[jump, Z], [Z, jump]]))
    return mats


def _h1_local_p(disc: Discretization, params: MaterialParams) -> list[np.ndarray]:
    mats = []
    for e in range(disc.mesh.n_elements):
        gxx, gyy, _, jump = _h1_blocks(disc, e)
        mats.append(float(params.K[e]) * (gxx + gyy) + jump)
    return mats


def discrete_h1_u(u: np.ndarray, disc: Discretization, params: MaterialParams) -> float:
    """``(sum_T 2 mu |eps v0|^2 + lambda |div v0|^2 + h_T^-1 |v0 - vb|^2_dT)^(1/2)``."""
    return _quadratic(u, disc, True, _h1_local_u(disc, params))


def discrete_h1_p(p: np.ndarray, disc: Discretization, params: MaterialParams) -> float:
    """``(sum_T K |grad q0|^2 + h_T^-1 |q0 - qb|^2_dT)^(1/2)``."""
    return _quadratic(p, disc, False, _h1_local_p(disc, params))


def discrete_h1_matrices(disc: Discretization, params: MaterialParams):
    """Global sparse Gram matrices of the two discrete H1 norms, ``(H_u, H_p)``."""
    from .assembly import _scatter

    dm = disc.dofmap
    ids_u = [dm.element_u_dofs(e) for e in range(disc.mesh.n_elements)]
    ids_p = [dm.element_dofs[e] for e in range(disc.mesh.n_elements)]
    Hu = _scatter(_h1_local_u(disc, params), ids_u, ids_u, (dm.n_u, dm.n_u))
    Hp = _scatter(_h1_local_p(disc, params), ids_p, ids_p, (dm.n_p, dm.n_p))
    return Hu, Hp


# ---------------------------------------------------------------------------
# convergence records

@dataclass(frozen=True)
class ConvergenceRecord:
    level: int
    h: float
    err_l2_u: float
    err_hw_u: float
    err_hw_p: float
    orders: tuple[float | None, float | None, float | None] | None = None

    @property
    def errors(self) -> tuple[float, float, float]:
        return (self.err_l2_u, self.err_hw_u, self.err_hw_p)


def errors_vs_exact(state, problem) -> ConvergenceRecord:
    """Errors of ``state`` against ``Q_h`` of the exact solution at ``state.t``."""
    sc, disc = problem.scenario, problem.disc
    if not sc.has_exact:
        raise UnsupportedError(f"scenario {sc.name!r} has no exact solution")
    eu = disc.project_vector(sc.exact_u, state.t) - state.u
    ep = disc.project_scalar(sc.exact_p, state.t) - state.p
    return ConvergenceRecord(
        level=disc.mesh.level,
        h=disc.mesh.mesh_size,
        err_l2_u=l2_interior_norm(eu, disc, 2),
        err_hw_u=weak_gradient_norm_u(eu, disc),
        err_hw_p=weak_gradient_norm_p(ep, disc),
    )


def true_l2_error_u(state, problem, extra_degree: int = 6) -> float:
    """``|u(t) - u0_h|`` over the interiors by over-resolved quadrature; sanity check only."""
    sc, disc = problem.scenario, problem.disc
    if sc.exact_u is None:
        raise UnsupportedError(f"scenario {sc.name!r} has no exact displacement")
    mesh, dm = disc.mesh, disc.dofmap
    total = 0.0
    for el in mesh.elements:
        verts = mesh.element_vertices(el.id)
        quad = polygon_rule(verts, 2 * disc.k + extra_degree)
        phi = eval_basis(element_basis(verts, disc.k), quad.points)
        exact = np.asarray(sc.exact_u(quad.points[:, 0], quad.points[:, 1], state.t), dtype=float)
        ids = dm.interior_dofs(el.id)
        for c in range(2):
            diff = exact[c] - phi @ state.u[c * dm.n_p + ids]
            total += float(quad.weights @ diff**2)
    return math.sqrt(total)


def observed_order(coarse: float, fine: float, ratio: float = 2.0) -> float | None:
    if coarse == 0.0 or fine == 0.0:
        return None
    return math.log(coarse / fine) / math.log(ratio)


def compute_orders(records: Sequence[ConvergenceRecord]) -> list[ConvergenceRecord]:
    """Attach ``log2`` error ratios to every record that has a predecessor."""
    out = [replace(records[0], orders=None)] if records else []
    for prev, cur in zip(records, records[1:]):
        ratio = prev.h / cur.h
        orders = tuple(observed_order(a, b, ratio) for a, b in zip(prev.errors, cur.errors))
        out.append(replace(cur, orders=orders))
    return out


def _fmt_err(x: float) -> str:
    # 0.896E-02 style: three significant digits, mantissa in [0.1, 1)
    if x == 0.0 or not math.isfinite(x):
        return f"{x:10.3E}"
    exp = math.floor(math.log10(abs(x))) + 1
    mant = x / 10.0**exp
    if round(abs(mant), 3) >= 1.0:
        mant /= 10.0
        exp += 1
    return f"{mant:.3f}E{exp:+03d}"


def _fmt_order(o: float | None) -> str:
    return "   -" if o is None else f"{o:4.1f}"


def format_table(records: Sequence[ConvergenceRecord], title: str = "") -> str:
    head = f"{'G':>3} | {'|Q_h u - u_h|':>13} {'O(h^r)':>6} | {'|grad_w(Q_h u - u_h)|':>21} {'O(h^r)':>6} | {'|grad_w(Q_h p - p_h)|':>21} {'O(h^r)':>6}"
    lines = [title] if title else []
    lines += [head, "-" * len(head)]
    for rec in records:
        o = rec.orders or (None, None, None)
        lines.append(
            f"{rec.level:>3} | {_fmt_err(rec.err_l2_u):>13} {_fmt_order(o[0]):>6} | "
            f"{_fmt_err(rec.err_hw_u):>21} {_fmt_order(o[1]):>6} | {_fmt_err(rec.err_hw_p):>21} {_fmt_order(o[2]):>6}"
        )
    return "\n".join(lines)


CSV_FIELDS = ["level", "h", "err_l2_u", "order_l2_u", "err_hw_u", "order_hw_u", "err_hw_p", "order_hw_p"]


def write_csv(records: Sequence[ConvergenceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            o = rec.orders or (None, None, None)
            row = [rec.level, repr(rec.h)]
            for err, order in zip(rec.errors, o):
                row += [repr(err), "" if order is None else repr(order)]
            writer.writerow(row)
