"""Backward-Euler time marching."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .assembly import Discretization, MaterialParams, assemble_loads, build_step_system
from .dofspace import constrain_dirichlet
from .exceptions import ArgumentError, SingularSystemError
from .mesh import Mesh
from .polybasis import eval_basis
from .quadrature import polygon_rule
from .scenarios import Scenario
from .solver import SolveReport, solve_saddle
from .weakops import RPolicy, element_basis, shape_key


@dataclass(frozen=True)
class TransientState:
    t: float
    u: np.ndarray
    p: np.ndarray
    step_index: int = 0


@dataclass
class Problem:
    """A scenario bound to a mesh, with the time-independent matrices assembled."""

    scenario: Scenario
    disc: Discretization
    params: MaterialParams
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    last_report: SolveReport | None = None
    lu_cache: dict = field(default_factory=dict, repr=False)

    @property
    def mesh(self) -> Mesh:
        return self.disc.mesh

    @classmethod
    def setup(cls, scenario: Scenario, mesh: Mesh, k: int, policy: RPolicy | str = RPolicy.THEORY) -> "Problem":
        mesh = scenario.bind(mesh)
        disc = Discretization(mesh, k, policy)
        params = scenario.material(mesh)
        A, B, C = disc.assemble(params)
        return cls(scenario, disc, params, A, B, C)


INIT_MODES = ("projection", "equilibrium")
_RITZ_CACHE: dict[tuple, np.ndarray] = {}


def initialize(problem: Problem, u0=None, p0=None, mode: str = "projection") -> TransientState:
    """Initial state from the scenario fields (or the given ones).

    ``mode="projection"`` takes ``Q_h`` of both fields.  ``mode="equilibrium"``
    starts from a discretely balanced pair instead: the pressure is the Ritz
    projection ``(K grad_w p, grad_w q) = (K grad p0, grad_w q)`` when the
    scenario supplies ``exact_grad_p`` (otherwise ``Q_h p0``), and the
    displacement solves ``A u - B^T p = F(0)``.  Starting in balance avoids a
    slowly relaxing start-up transient when ``dt`` is tiny.
    """
    if mode not in INIT_MODES:
        raise ArgumentError(f"unknown initialization mode {mode!r}; expected one of {INIT_MODES}")
    disc, sc = problem.disc, problem.scenario
    u0 = sc.initial_u if u0 is None else u0
    p0 = sc.initial_p if p0 is None else p0
    u = disc.project_vector(u0)
    p = disc.project_scalar(p0)
    if mode == "equilibrium":
        if sc.exact_grad_p is not None:
            p = ritz_pressure(problem, lambda x, y: sc.exact_grad_p(x, y, 0.0), 0.0)
        u = _equilibrium_displacement(problem, p, 0.0)
    return TransientState(0.0, u, p, 0)


def ritz_pressure(problem: Problem, grad_p, t: float = 0.0) -> np.ndarray:
    """Pressure whose weak flux matches ``K grad_p`` elementwise, Dirichlet edges from the data."""
    from scipy.sparse.linalg import spsolve

    sc, disc = problem.scenario, problem.disc
    mesh, dm = disc.mesh, disc.dofmap
    load = np.zeros(dm.n_p)
    for el, op in zip(mesh.elements, disc.ops):
        verts = mesh.element_vertices(el.id)
        key = (shape_key(verts), op.r)
        if key not in _RITZ_CACHE:
            rule = polygon_rule(verts, 2 * op.r + 2)
            basis = element_basis(verts, op.r)
            _RITZ_CACHE[key] = (rule.points - basis.center, eval_basis(basis, rule.points) * rule.weights[:, None])
        rel, wphi = _RITZ_CACHE[key]
        pts = el.centroid + rel
        w = np.asarray(grad_p(pts[:, 0], pts[:, 1]), dtype=float)
        K = problem.params.K[el.id]
        flux = K @ w if np.ndim(K) == 2 else float(K) * w
        load[dm.element_dofs[el.id]] += op.grad_x.T @ (wphi.T @ flux[0]) + op.grad_y.T @ (wphi.T @ flux[1])
    dofmap = constrain_dirichlet(dm, mesh, sc.u_dirichlet, sc.p_dirichlet, t)
    fp, cp = dofmap.free_p, dofmap.constrained_p
    C = problem.C.tocsr()
    p = np.zeros(dm.n_p)
    p[cp] = dofmap.values_p
    rhs = load[fp] - C[fp][:, cp] @ dofmap.values_p
    if not cp.size:
        raise ArgumentError("Ritz pressure needs at least one Dirichlet pressure edge")
    p[fp] = spsolve(C[fp][:, fp].tocsc(), rhs)
    return p


def _equilibrium_displacement(problem: Problem, p: np.ndarray, t: float) -> np.ndarray:
    from scipy.sparse.linalg import spsolve

    sc, disc = problem.scenario, problem.disc
    dofmap = constrain_dirichlet(disc.dofmap, disc.mesh, sc.u_dirichlet, sc.p_dirichlet, t)
    rhs_u, _ = assemble_loads(disc, sc.f, sc.g, sc.beta, t)
    fu, cu = dofmap.free_u, dofmap.constrained_u
    A = problem.A.tocsr()
    u = np.zeros(dofmap.n_u)
    u[cu] = dofmap.values_u
    rhs = rhs_u + problem.B.T @ p
    u[fu] = spsolve(A[fu][:, fu].tocsc(), rhs[fu] - A[fu][:, cu] @ dofmap.values_u)
    return u


def step(state: TransientState, dt: float, problem: Problem) -> TransientState:
    if not dt > 0:
        raise ArgumentError(f"time step must be positive, got {dt}")
    sc, disc = problem.scenario, problem.disc
    t = state.t + dt
    dofmap = constrain_dirichlet(disc.dofmap, disc.mesh, sc.u_dirichlet, sc.p_dirichlet, t)
    rhs_u, g_load = assemble_loads(disc, sc.f, sc.g, sc.beta, t)
    system = build_step_system(
        problem.A, problem.B, problem.C, rhs_u, g_load, state.u, dt, dofmap, key=(id(problem.A),)
    )
    try:
        u, p, report = solve_saddle(system, problem.lu_cache)
    except SingularSystemError as exc:
        raise SingularSystemError(f"step {state.step_index + 1} (t={t:g}): {exc}") from exc
    problem.last_report = report
    return TransientState(t, u, p, state.step_index + 1)


Observer = Callable[[TransientState, TransientState], None]


def run(
    state: TransientState,
    dt: float,
    n_steps: int,
    problem: Problem,
    observers: Iterable[Observer] = (),
) -> TransientState:
    """March ``n_steps`` steps; each observer sees ``(previous, current)`` after every step."""
    if n_steps < 1:
        raise ArgumentError(f"n_steps must be >= 1, got {n_steps}")
    observers = list(observers)
    for _ in range(n_steps):
        new = step(state, dt, problem)
        for obs in observers:
            obs(state, new)
        state = new
    return state


def steady_solution(problem: Problem, t: float = 0.0) -> TransientState:
    """Equilibrium for time-independent data: ``C p = -G`` and ``A u - B^T p = F``."""
    sc, disc = problem.scenario, problem.disc
    dofmap = constrain_dirichlet(disc.dofmap, disc.mesh, sc.u_dirichlet, sc.p_dirichlet, t)
    rhs_u, g_load = assemble_loads(disc, sc.f, sc.g, sc.beta, t)
    from scipy.sparse.linalg import spsolve

    fp, cp = dofmap.free_p, dofmap.constrained_p
    C = problem.C.tocsr()
    p = np.zeros(dofmap.n_p)
    p[cp] = dofmap.values_p
    p[fp] = spsolve(C[fp][:, fp].tocsc(), -g_load[fp] - C[fp][:, cp] @ dofmap.values_p)
    return TransientState(t, _equilibrium_displacement(problem, p, t), p, 0)


def with_time(state: TransientState, t: float) -> TransientState:
    return replace(state, t=t)


class SteadinessMonitor:
    """Observer tracking ``|u^n - u^(n-1)|/dt`` in the interior L2 norm.

    ``measure`` is the last rate divided by the first one, so it starts at 1
    and decays towards 0 as the run settles.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        self.rates: list[float] = []

    def __call__(self, prev: TransientState, new: TransientState) -> None:
        from .errors import l2_interior_norm

        dt = new.t - prev.t
        self.rates.append(l2_interior_norm(new.u - prev.u, self.problem.disc, 2) / dt)

    @property
    def measure(self) -> float:
        if not self.rates:
            raise ArgumentError("no steps observed")
        if self.rates[0] == 0.0:
            return 0.0
        return self.rates[-1] / self.rates[0]
