"""Closed-form problem data on the unit square.

Fields are vectorised callables ``field(x, y, t)``; vector fields return a
``(2, n)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .assembly import MaterialParams
from .exceptions import ArgumentError, ScenarioError
from .mesh import BoundaryTag, Edge, Mesh

Field = Callable[..., np.ndarray]

pi = np.pi


@dataclass(frozen=True)
class Scenario:
    name: str
    E: float
    nu: float
    conductivity: Callable[[float, float], float]
    f: Field | None
    g: Field | None
    side_tags: dict[str, tuple[BoundaryTag, BoundaryTag]]
    initial_u: Field
    initial_p: Field
    exact_u: Field | None = None
    exact_p: Field | None = None
    exact_grad_p: Field | None = None
    beta: Field | None = None
    u_dirichlet: Field | None = None
    p_dirichlet: Field | None = None
    interfaces: tuple[float, ...] = ()
    options: dict = field(default_factory=dict)

    @property
    def has_exact(self) -> bool:
        return self.exact_u is not None and self.exact_p is not None

    def bind(self, mesh: Mesh) -> Mesh:
        """Tag the boundary of ``mesh`` and check that no element straddles a K interface."""
        for x0 in self.interfaces:
            for el in mesh.elements:
                xs = mesh.element_vertices(el.id)[:, 0]
                if xs.min() < x0 - 1e-12 and xs.max() > x0 + 1e-12:
                    raise ScenarioError(f"element {el.id} straddles the conductivity interface x={x0}")

        def tagger(edge: Edge):
            if edge.side not in self.side_tags:
                raise ScenarioError(f"boundary edge {edge.id} has no side label")
            return self.side_tags[edge.side]

        return mesh.with_boundary_tags(tagger)

    def material(self, mesh: Mesh) -> MaterialParams:
        K = np.array([self.conductivity(*el.centroid) for el in mesh.elements], dtype=float)
        return MaterialParams.from_young(self.E, self.nu, K)


# ---------------------------------------------------------------------------
# manufactured transient solution

def manufactured_biot(nu0: float, E: float = 1.0, K: float = 1.0) -> Scenario:
    """u = e^-t sin(pi x) sin(pi y) (1, 1), p = e^-t (cos(pi y) + 1)."""
    if not 0.0 < nu0 < 0.5:
        raise ArgumentError(f"nu0 must lie in (0, 1/2), got {nu0}")
    mu, lam = MaterialParams.lame(E, nu0)

    def exact_u(x, y, t):
        v = np.exp(-t) * np.sin(pi * x) * np.sin(pi * y)
        return np.array([v, v])

    def exact_p(x, y, t):
        return np.exp(-t) * (np.cos(pi * y) + 1.0)

    def grad_p(x, y, t):
        x = np.asarray(x, dtype=float)
        return np.array([np.zeros_like(x), -pi * np.exp(-t) * np.sin(pi * y) * np.ones_like(x)])

    def f(x, y, t):
        f1 = pi**2 * ((3 * mu + lam) * np.sin(pi * x) * np.sin(pi * y) - (lam + mu) * np.cos(pi * x) * np.cos(pi * y))
        e = np.exp(-t)
        return np.array([e * f1, e * f1 - e * pi * np.sin(pi * y)])

    def g(x, y, t):
        return np.exp(-t) * pi * (
            np.cos(pi * x) * np.sin(pi * y) + np.sin(pi * x) * np.cos(pi * y) - pi * K * np.cos(pi * y)
        )

    clamp_u = BoundaryTag.GAMMA_C_U
    scenario = Scenario(
        name="manufactured",
        E=E,
        nu=nu0,
        conductivity=lambda x, y: K,
        f=f,
        g=g,
        side_tags={
            "left": (clamp_u, BoundaryTag.GAMMA_C_P),
            "right": (clamp_u, BoundaryTag.GAMMA_C_P),
            "bottom": (clamp_u, BoundaryTag.GAMMA_C_P),
            "top": (clamp_u, BoundaryTag.GAMMA_T_P),
        },
        initial_u=lambda x, y: exact_u(x, y, 0.0),
        initial_p=lambda x, y: exact_p(x, y, 0.0),
        exact_u=exact_u,
        exact_p=exact_p,
        exact_grad_p=grad_p,
        u_dirichlet=exact_u,
        p_dirichlet=exact_p,
        options={"K": K},
    )
    residual = pde_residual(scenario, _samples(5))
    if not residual <= 1e-8:
        raise ScenarioError(f"manufactured data fails the PDE self-check (residual {residual:.2e})")
    return scenario


def _samples(n: int, seed: int = 20240611) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n, 3))


@lru_cache(maxsize=1)
def _symbolic_operators():
    import sympy as sy

    x, y, t, mu, lam, K = sy.symbols("x y t mu lam K")
    u = sy.exp(-t) * sy.sin(sy.pi * x) * sy.sin(sy.pi * y)
    U = sy.Matrix([u, u])
    P = sy.exp(-t) * (sy.cos(sy.pi * y) + 1)
    X = (x, y)
    grad = sy.Matrix(2, 2, lambda i, j: sy.diff(U[i], X[j]))
    eps = (grad + grad.T) / 2
    div = grad.trace()
    sigma = 2 * mu * eps + lam * div * sy.eye(2)
    f_sym = [-sum(sy.diff(sigma[i, j], X[j]) for j in range(2)) + sy.diff(P, X[i]) for i in range(2)]
    g_sym = -sy.diff(div, t) + sum(sy.diff(K * sy.diff(P, X[j]), X[j]) for j in range(2))
    args = (x, y, t, mu, lam, K)
    return (
        sy.lambdify(args, sy.Matrix(f_sym), "numpy"),
        sy.lambdify(args, g_sym, "numpy"),
        sy.lambdify(args, U, "numpy"),
        sy.lambdify(args, P, "numpy"),
        sy.lambdify(args, sy.Matrix([sy.diff(P, x), sy.diff(P, y)]), "numpy"),
    )


def pde_residual(scenario: Scenario, samples: np.ndarray) -> float:
    """Max mismatch between the scenario data and a symbolic derivation from its exact solution."""
    f_sym, g_sym, u_sym, p_sym, gp_sym = _symbolic_operators()
    mu, lam = MaterialParams.lame(scenario.E, scenario.nu)
    K = scenario.options.get("K", 1.0)
    worst = 0.0
    for x, y, t in samples:
        X, Y = np.array([x]), np.array([y])
        pairs = [
            (np.ravel(f_sym(x, y, t, mu, lam, K)), scenario.f(X, Y, t)[:, 0]),
            (np.array([g_sym(x, y, t, mu, lam, K)]), scenario.g(X, Y, t)),
            (np.ravel(u_sym(x, y, t, mu, lam, K)), scenario.exact_u(X, Y, t)[:, 0]),
            (np.array([p_sym(x, y, t, mu, lam, K)]), scenario.exact_p(X, Y, t)),
        ]
        if scenario.exact_grad_p is not None:
            pairs.append((np.ravel(gp_sym(x, y, t, mu, lam, K)), scenario.exact_grad_p(X, Y, t)[:, 0]))
        for ref, val in pairs:
            worst = max(worst, float(np.max(np.abs(np.asarray(ref, dtype=float) - val))))
    return worst


# ---------------------------------------------------------------------------
# heterogeneous conductivity, marched towards steady state

def band_conductivity(K0: float) -> Callable[[float, float], float]:
    def K(x, y):
        return K0 if 0.25 <= x <= 0.75 else 1.0

    return K


def heterogeneous_steady(K0: float, nu: float = 0.25, E: float = 1.0) -> Scenario:
    """Displacement (-sin(pi y), 0) pushed in at x = 1, drained there; K0 in the middle band."""
    if not K0 > 0:
        raise ArgumentError(f"K0 must be positive, got {K0}")

    def u_data(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.array([-np.sin(pi * y) * np.ones_like(x), np.zeros_like(x)])

    def zero_p(x, y, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    return Scenario(
        name="heterogeneous",
        E=E,
        nu=nu,
        conductivity=band_conductivity(K0),
        f=None,
        g=None,
        side_tags={
            "right": (BoundaryTag.GAMMA_C_U, BoundaryTag.GAMMA_T_P),
            "top": (BoundaryTag.GAMMA_C_U, BoundaryTag.GAMMA_C_P),
            "bottom": (BoundaryTag.GAMMA_C_U, BoundaryTag.GAMMA_C_P),
            "left": (BoundaryTag.GAMMA_T_U, BoundaryTag.GAMMA_C_P),
        },
        initial_u=lambda x, y: u_data(x, y),
        initial_p=lambda x, y: zero_p(x, y),
        u_dirichlet=u_data,
        p_dirichlet=zero_p,
        interfaces=(0.25, 0.75),
        options={"K0": K0},
    )


SCENARIOS = {"manufactured": manufactured_biot, "heterogeneous": heterogeneous_steady}
