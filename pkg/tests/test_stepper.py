import numpy as np
import pytest

from wgbiot.errors import errors_vs_exact, l2_interior_norm, energy_norm_u, weak_gradient_norm_u
from wgbiot.exceptions import ArgumentError
from wgbiot.mesh import BoundaryTag, build_nonconvex_grid
from wgbiot.polybasis import eval_basis
from wgbiot.quadrature import polygon_rule
from wgbiot.scenarios import Scenario, heterogeneous_steady, manufactured_biot
from wgbiot.stepper import (
    Problem,
    SteadinessMonitor,
    TransientState,
    initialize,
    ritz_pressure,
    run,
    steady_solution,
    step,
)
from wgbiot.weakops import RPolicy, element_basis

FP2 = RPolicy.FIXED_PLUS2


def interior_l2_error(problem, coeffs, field, degree=12):
    """Interior L2 distance of a vector field from its discrete counterpart, by quadrature."""
    disc = problem.disc
    mesh, dm = disc.mesh, disc.dofmap
    total = 0.0
    for el in mesh.elements:
        verts = mesh.element_vertices(el.id)
        q = polygon_rule(verts, degree)
        phi = eval_basis(element_basis(verts, disc.k), q.points)
        vals = field(q.points[:, 0], q.points[:, 1])
        ids = dm.interior_dofs(el.id)
        for c in range(2):
            total += q.weights @ (vals[c] - phi @ coeffs[c * dm.n_p + ids]) ** 2
    return float(np.sqrt(total))


def polynomial_scenario(k):
    """Time-independent global polynomial solution of degree k with consistent data."""
    a = np.array([0.3, -0.2, 0.5, 0.1, 0.4, -0.3, 0.2, 0.15, -0.1, 0.05])
    mu, lam = 0.4, 0.4
    if k == 1:
        def u(x, y, t=0.0):
            return np.array([a[0] * x + a[1] * y + a[2], a[3] * x + a[4] * y])

        def f(x, y, t=0.0):
            return np.array([np.full_like(x, a[5]), np.full_like(x, a[6])])  # grad p

        def p(x, y, t=0.0):
            return a[5] * x + a[6] * y + 1.0

        def grad_p(x, y, t=0.0):
            return np.array([np.full_like(x, a[5]), np.full_like(x, a[6])])
    else:
        # u = (x^2, x y), p = x + y
        def u(x, y, t=0.0):
            return np.array([x**2, x * y])

        def p(x, y, t=0.0):
            return x + y

        def grad_p(x, y, t=0.0):
            return np.array([np.ones_like(x), np.ones_like(x)])

        def f(x, y, t=0.0):
            # sigma = 2 mu eps + lam div I with eps = [[2x, y/2], [y/2, x]] and div = 3x,
            # so div sigma = (5 mu + 3 lam, 0) and f = -div sigma + grad p
            return np.array([np.full_like(x, 1.0 - 5 * mu - 3 * lam), np.ones_like(x)])

    def g(x, y, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    all_dirichlet = (BoundaryTag.GAMMA_C_U, BoundaryTag.GAMMA_T_P)
    return Scenario(
        name=f"poly{k}",
        E=1.0,
        nu=0.25,
        conductivity=lambda x, y: 1.0,
        f=f,
        g=g,
        side_tags={s: all_dirichlet for s in ("left", "right", "top", "bottom")},
        initial_u=lambda x, y: u(x, y),
        initial_p=lambda x, y: p(x, y),
        exact_u=u,
        exact_p=p,
        exact_grad_p=grad_p,
        u_dirichlet=u,
        p_dirichlet=p,
    )


def test_polynomial_f_is_consistent():
    # oracle for the k = 2 body force: -div sigma + grad p with sympy
    import sympy as sp

    x, y = sp.symbols("x y")
    mu, lam = sp.Rational(2, 5), sp.Rational(2, 5)
    U = sp.Matrix([x**2, x * y])
    G = U.jacobian([x, y])
    eps = (G + G.T) / 2
    sig = 2 * mu * eps + lam * G.trace() * sp.eye(2)
    f = [-(sp.diff(sig[i, 0], x) + sp.diff(sig[i, 1], y)) + 1 for i in range(2)]
    got = polynomial_scenario(2).f(np.array([0.3]), np.array([0.7]))[:, 0]
    assert np.allclose(got, [float(f[0]), float(f[1])], atol=1e-14)


class TestInitialize:
    def test_zero_fields(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(1), 1, FP2)
        st = initialize(pb, lambda x, y: np.zeros((2, len(x))), lambda x, y: np.zeros(len(x)))
        assert not st.u.any() and not st.p.any() and st.t == 0.0 and st.step_index == 0

    @pytest.mark.parametrize("k", [1, 2])
    def test_polynomial_reproduced(self, k):
        sc = polynomial_scenario(k)
        pb = Problem.setup(sc, build_nonconvex_grid(2), k, FP2)
        st = initialize(pb)
        assert interior_l2_error(pb, st.u, lambda x, y: sc.exact_u(x, y)) <= 1e-11

    def test_projection_error_second_order(self):
        errs = []
        for level in (2, 3):
            sc = manufactured_biot(0.25)
            pb = Problem.setup(sc, build_nonconvex_grid(level), 1, FP2)
            st = initialize(pb)
            errs.append(interior_l2_error(pb, st.u, lambda x, y: sc.exact_u(x, y, 0.0)))
        assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.3)

    def test_unknown_mode(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(1), 1, FP2)
        with pytest.raises(ArgumentError):
            initialize(pb, mode="guess")

    def test_equilibrium_start_is_balanced(self):
        # with the balanced start the pressure-gradient error hardly moves over the first steps
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(3), 1, FP2)
        st0 = initialize(pb, mode="equilibrium")
        e0 = errors_vs_exact(st0, pb).err_hw_p
        e5 = errors_vs_exact(run(st0, 1e-5, 5, pb), pb).err_hw_p
        assert e5 <= 1.1 * e0

    def test_ritz_pressure_exact_for_linear(self):
        sc = polynomial_scenario(1)
        pb = Problem.setup(sc, build_nonconvex_grid(2), 1, FP2)
        p = ritz_pressure(pb, lambda x, y: sc.exact_grad_p(x, y))
        q = pb.disc.project_scalar(lambda x, y: sc.exact_p(x, y))
        assert np.abs(p - q).max() <= 1e-10


class TestStep:
    @pytest.mark.parametrize("level,k", [(2, 1), (2, 2), (3, 1), (3, 2)])
    def test_steady_fixed_point(self, level, k):
        pb = Problem.setup(heterogeneous_steady(1.0), build_nonconvex_grid(level), k, FP2)
        st = steady_solution(pb)
        nxt = step(st, 0.05, pb)
        assert np.linalg.norm(nxt.u - st.u) <= 1e-8 * np.linalg.norm(st.u)
        assert np.linalg.norm(nxt.p - st.p) <= 1e-8 * max(np.linalg.norm(st.p), 1.0)

    def test_two_half_steps_differ_from_one(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(2), 1, FP2)
        st = initialize(pb)
        one = step(st, 0.2, pb)
        two = step(step(st, 0.1, pb), 0.1, pb)
        assert one.t == pytest.approx(two.t)
        assert not np.allclose(one.u, two.u, rtol=1e-6, atol=0)

    def test_one_step_vs_protocol(self):
        sc = manufactured_biot(0.25)
        pb = Problem.setup(sc, build_nonconvex_grid(2), 1, FP2)
        st = initialize(pb)
        e1 = errors_vs_exact(step(st, 1e-5, pb), pb).err_hw_u
        e5 = errors_vs_exact(run(st, 1e-5, 5, pb), pb).err_hw_u
        assert 0.5 <= e1 / e5 <= 2.0

    @pytest.mark.parametrize("k", [1, 2])
    def test_patch_test(self, k):
        sc = polynomial_scenario(k)
        pb = Problem.setup(sc, build_nonconvex_grid(2), k, FP2)
        st = initialize(pb)
        nxt = step(st, 0.1, pb)
        exact = pb.disc.project_vector(lambda x, y: sc.exact_u(x, y))
        scale = weak_gradient_norm_u(exact, pb.disc)
        assert energy_norm_u(nxt.u - exact, pb.disc, pb.params) <= 1e-9 * scale

    def test_bad_dt(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(1), 1, FP2)
        with pytest.raises(ArgumentError):
            step(initialize(pb), 0.0, pb)


class TestRun:
    def test_single_step_equals_step(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(2), 1, FP2)
        st = initialize(pb)
        a, b = run(st, 0.01, 1, pb), step(st, 0.01, pb)
        assert np.array_equal(a.u, b.u) and np.array_equal(a.p, b.p) and a.step_index == 1

    def test_observer_count(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(1), 1, FP2)
        calls = []
        final = run(initialize(pb), 0.01, 4, pb, [lambda prev, new: calls.append((prev.step_index, new.step_index))])
        assert calls == [(0, 1), (1, 2), (2, 3), (3, 4)]
        assert final.t == pytest.approx(0.04)

    def test_bad_steps(self):
        pb = Problem.setup(manufactured_biot(0.25), build_nonconvex_grid(1), 1, FP2)
        with pytest.raises(ArgumentError):
            run(initialize(pb), 0.01, 0, pb)

    def test_heterogeneous_settles(self):
        pb = Problem.setup(heterogeneous_steady(1.0), build_nonconvex_grid(3), 1, FP2)
        monitor = SteadinessMonitor(pb)
        final = run(initialize(pb), 0.05, 20, pb, [monitor])
        assert final.t == pytest.approx(1.0)
        assert len(monitor.rates) == 20
        assert monitor.measure < 1e-2

    def test_monitor_needs_steps(self):
        pb = Problem.setup(heterogeneous_steady(1.0), build_nonconvex_grid(2), 1, FP2)
        with pytest.raises(ArgumentError):
            SteadinessMonitor(pb).measure


def test_state_is_frozen():
    st = TransientState(0.0, np.zeros(2), np.zeros(1))
    with pytest.raises(Exception):
        st.t = 1.0
