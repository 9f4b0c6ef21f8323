from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfrac.contour_solver import (
    PencilProblem,
    admissible_nu_bound,
    b_interval,
    build_contour,
    damping_constant,
    degenerate_problem,
    diagonal_problem,
    initial_limit_check,
    neville,
    resolvent_analyticity,
    resolvent_scenario,
    scalar_problem,
    scenario_data,
    second_order_problem,
    sector_check,
    support_sets,
    u_epsilon,
    verify_pde,
)
from degenfrac.errors import (
    BadExponents,
    BadParams,
    EmptyInterval,
    NotResolvent,
    PencilSingular,
    QuadratureUnderResolved,
    RootEscape,
)
from degenfrac.special_functions import mittag_leffler

EPSILONS = [0.1, 0.05, 0.025, 0.0125]


def residue_value(p, eps, t, x0, y0=None):
    """Closed form for ``D^zeta u + alpha0 u = 0``: the only pole is ``mu = -alpha0``."""
    alpha0 = p.ops[0][0, 0].real
    damp = math.exp(-eps * (p.a + alpha0) ** (p.b / p.zeta))
    val = damp * mittag_leffler(-alpha0 * t**p.zeta, p.zeta) * x0
    if y0 is not None:
        val += damp * t * mittag_leffler(-alpha0 * t**p.zeta, p.zeta, 2.0) * y0
    return val


class TestExponents:
    @pytest.mark.parametrize("q, expected", [((0, 1), 0), ((0, 1, 2), -1), ((0, 2), -1), ((0, 1, 1, 3), -2)])
    def test_bound_table(self, q, expected):
        assert admissible_nu_bound(q) == expected

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=4))
    def test_bound_never_exceeds(self, tail):
        q = (0,) + tuple(sorted(tail))
        assert admissible_nu_bound(q) <= 1 - q[-1]

    @pytest.mark.parametrize("q", [(1, 2), (0, 0), (0, 2, 1), (0,), (0, 1.5)])
    def test_bad(self, q):
        with pytest.raises(BadExponents):
            admissible_nu_bound(q)

    def test_support_sets(self):
        assert support_sets((0, 1, 3)) == [[1, 2], [2], [2]]


class TestProblem:
    def test_b_midpoint(self):
        p = scalar_problem(zeta=1.0, theta=math.pi / 4)
        lo, hi = b_interval(1.0, math.pi / 4)
        assert (lo, hi) == (1.0, pytest.approx(2.0))
        assert p.b == pytest.approx(1.5)

    @pytest.mark.parametrize("theta", [0.0, 0.5 * math.pi, -0.1])
    def test_theta_outside(self, theta):
        with pytest.raises(EmptyInterval):
            scalar_problem(zeta=1.0, theta=theta)

    def test_b_interval_empty(self):
        with pytest.raises(EmptyInterval):
            b_interval(1.0, 0.0)

    def test_noncommuting_regularizer(self):
        with pytest.raises(BadParams):
            PencilProblem((0, 1), 1.0, (np.array([[0, 1], [0, 0.0]]), np.eye(2)), np.diag([1.0, 2.0]),
                          theta=math.pi / 4)

    def test_singular_regularizer(self):
        with pytest.raises(BadParams):
            PencilProblem((0, 1), 1.0, (np.eye(2), np.eye(2)), np.diag([1.0, 0.0]), theta=math.pi / 4)

    def test_nu_prime_too_large(self):
        with pytest.raises(BadParams):
            PencilProblem((0, 1), 1.0, (np.eye(1), np.eye(1)), np.eye(1), theta=math.pi / 4, nu_prime=0.0)

    def test_radii(self):
        with pytest.raises(BadParams):
            scalar_problem(r=1.0, a=1.0)

    def test_json_round_trip(self):
        p = diagonal_problem(seed=3)
        back = PencilProblem.from_json(p.to_json())
        assert back.dumps() == p.dumps()
        q = PencilProblem((0, 1), 1.0, (np.array([[1j]]), np.eye(1)), np.eye(1), theta=math.pi / 4)
        assert PencilProblem.from_json(q.to_json()).ops[0][0, 0] == 1j

    def test_missing_field(self):
        doc = scalar_problem().to_json()
        del doc["r"]
        with pytest.raises(BadParams):
            PencilProblem.from_json(doc)


class TestContour:
    @pytest.mark.parametrize("zeta", [0.5, 1.0, 1.5, 2.0])
    def test_nodes_on_boundary(self, zeta):
        p = scalar_problem(zeta=zeta)
        q = build_contour(p)
        assert np.all(np.abs(q.nodes) >= p.r * (1 - 1e-12))
        assert np.all(np.abs(np.angle(q.nodes)) <= p.sector_angle + 1e-12)
        lower, arc, upper = q.segments
        assert lower + arc + upper == q.nodes.size

    def test_weights_integrate_constant(self):
        p = scalar_problem()
        q = build_contour(p)
        R, th = q.truncation_radius, p.sector_angle
        expected = (R * cmath.exp(1j * th) - R * cmath.exp(-1j * th)) / (2j * math.pi)
        assert np.sum(q.weights) == pytest.approx(expected, rel=1e-12)

    def test_entire_damped_integral_vanishes(self):
        p = scalar_problem()
        q = build_contour(p)
        vals = np.exp(-0.1 * (p.a - q.nodes) ** (p.b / p.zeta)) * q.nodes**3
        assert abs(np.sum(q.weights * vals)) <= 1e-13

    def test_damping_truncation(self):
        p = scalar_problem()
        q = build_contour(p, epsilon_floor=0.01)
        R = q.truncation_radius
        for s in (-1, 1):
            lam = R * cmath.exp(1j * s * p.sector_angle)
            assert abs(cmath.exp(-0.01 * (p.a - lam) ** (p.b / p.zeta))) <= 1e-16

    def test_points_per_segment(self):
        with pytest.raises(ValueError):
            build_contour(scalar_problem(), points_per_segment=8)

    @pytest.mark.parametrize("zeta", [0.5, 0.8, 1.0, 1.5, 2.0])
    def test_damping_constant(self, zeta):
        p = scalar_problem(zeta=zeta)
        q = build_contour(p)
        for eps in (1.0, 0.1, 0.01):
            assert damping_constant(p, q, eps, 1.0) <= 10


class TestResidueOracle:
    @pytest.mark.parametrize("zeta", [0.5, 0.8, 1.0, 1.5, 2.0])
    @pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
    def test_scalar(self, zeta, eps):
        p = scalar_problem(1.0, zeta)
        q = build_contour(p)
        y = [[0.5]] if zeta > 1 else None
        for t in (0.5, 2.0):
            u = u_epsilon(p, q, [[1.0]], y, eps, t)
            ref = residue_value(p, eps, t, 1.0, 0.5 if zeta > 1 else None)
            assert abs(u[0] - ref) <= 1e-10 * abs(ref)

    def test_derivative_eigen_relation(self):
        p = scalar_problem(2.0, 0.8)
        q = build_contour(p)
        u = u_epsilon(p, q, [[1.0]], None, 0.1, 1.0)
        du = u_epsilon(p, q, [[1.0]], None, 0.1, 1.0, deriv_p=1)
        assert du[0] == pytest.approx(-2.0 * u[0], rel=1e-10)

    def test_degenerate_component_vanishes(self):
        p = degenerate_problem()
        q = build_contour(p)
        u = u_epsilon(p, q, [[1.0, 1.0]], None, 0.1, 1.0)
        assert abs(u[1]) <= 1e-14

    def test_complex_time(self):
        p = scalar_problem(1.0, 1.0)
        q = build_contour(p)
        z = 1 + 0.5j
        u = u_epsilon(p, q, [[1.0]], None, 0.1, z)
        damp = math.exp(-0.1 * (p.a + 1) ** (p.b / p.zeta))
        assert u[0] == pytest.approx(damp * cmath.exp(-z), rel=1e-10)


class TestErrors:
    def test_below_floor(self):
        p = scalar_problem()
        with pytest.raises(ValueError):
            u_epsilon(p, build_contour(p, epsilon_floor=0.05), [[1.0]], None, 0.01, 1.0)

    def test_beyond_t_max(self):
        p = scalar_problem()
        with pytest.raises(ValueError):
            u_epsilon(p, build_contour(p, t_max=1.0), [[1.0]], None, 0.1, 2.0)

    def test_data_families(self):
        p = scalar_problem()
        q = build_contour(p)
        with pytest.raises(ValueError):
            u_epsilon(p, q, [[1.0]], [[1.0]], 0.1, 1.0)
        p2 = scalar_problem(zeta=1.5)
        with pytest.raises(ValueError):
            u_epsilon(p2, build_contour(p2), [[1.0]], None, 0.1, 1.0)

    def test_singular_pencil(self):
        base = scalar_problem()
        node = build_contour(base).nodes[5]
        p = PencilProblem((0, 1), 1.0, (np.array([[-node]]), np.eye(1)), np.eye(1), 0.0, base.theta,
                          base.r, base.a, -0.5)
        with pytest.raises(PencilSingular):
            u_epsilon(p, build_contour(p), [[1.0]], None, 0.1, 1.0)

    def test_under_resolved(self):
        # narrow rays let E_zeta grow faster than double precision can cancel
        p = scalar_problem(1.0, 1.5, theta=-0.125 * math.pi)
        q = build_contour(p, epsilon_floor=0.05)
        with pytest.raises(QuadratureUnderResolved):
            u_epsilon(p, q, [[1.0]], [[0.5]], 0.05, 2.0)


class TestVerifyPde:
    @pytest.mark.parametrize("problem", [scalar_problem(), degenerate_problem(), diagonal_problem(seed=4),
                                         scalar_problem(zeta=1.5), second_order_problem()],
                             ids=["scalar", "degenerate2x2", "diagonal3x3", "scalar_1.5", "second_order"])
    def test_residual(self, problem):
        X, Y = scenario_data(problem, seed=1)
        if problem.m == 2:
            X[:, 1] = 0
        rep = verify_pde(problem, build_contour(problem), X, Y, epsilon=0.05)
        assert rep.passed
        assert rep.observed <= 1e-10 and rep.detail["doubling_shift"] <= 1e-8


class TestInitialLimit:
    @pytest.mark.parametrize("problem", [scalar_problem(0.25, 1.0, r=0.5, a=0.75),
                                         scalar_problem(0.25, 0.8, r=0.5, a=0.75),
                                         degenerate_problem(0.25, 1.0, r=0.5, a=0.75)],
                             ids=["scalar", "scalar_0.8", "degenerate2x2"])
    def test_first_order(self, problem):
        x = np.zeros((1, problem.m))
        x[0, 0] = 1.0
        rep = initial_limit_check(problem, build_contour(problem), x, EPSILONS, 0, 0)
        assert rep.monotone and rep.passed
        assert rep.limit_error <= 1e-4

    @pytest.mark.parametrize("l, omega", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_second_order(self, l, omega):
        p = second_order_problem()
        rep = initial_limit_check(p, build_contour(p), [[1.0], [0.7]], EPSILONS, l, omega)
        assert rep.passed
        if l != omega:
            assert np.linalg.norm(rep.extrapolated) <= 1e-4

    def test_rotation_target(self):
        p = PencilProblem((0, 1), 1.0, (np.array([[0.25]]), np.eye(1)), np.eye(1), phi=0.3,
                          theta=0.15 * math.pi, r=0.5, a=0.75, nu_prime=-0.5)
        rep = initial_limit_check(p, build_contour(p), [[1.0]], EPSILONS, 0, 0)
        assert rep.target[0] == pytest.approx(cmath.exp(-0.3j))

    def test_epsilons_must_decrease(self):
        p = scalar_problem()
        with pytest.raises(ValueError):
            initial_limit_check(p, build_contour(p), [[1.0]], [0.1, 0.2], 0, 0)


def test_neville_exact_on_cubics():
    xs = [0.1, 0.05, 0.025, 0.0125]
    ys = [3 - 2 * x + x**3 for x in xs]
    assert neville(xs, ys, 0.0) == pytest.approx(3.0, abs=1e-13)


class TestSector:
    def test_scalar_bounded(self):
        rep = sector_check(scalar_problem())
        assert rep.bounded and rep.samples == 200
        assert rep.growth_exponent == pytest.approx(-0.5, abs=0.01)

    def test_degenerate_unbounded(self):
        # B singular: Q(mu)^{-1} tends to diag(0, 1) and the weighted norm grows
        assert not sector_check(degenerate_problem()).bounded


class TestResolvent:
    def test_nilpotent_regularizer(self):
        A = np.array([[0, 1], [0, 0.0]])
        p = resolvent_scenario(A, [[0, 1], [1]], 1.0, 1.0, 0.0, math.pi / 4, 1.0, qprime=2)
        np.testing.assert_allclose(p.C, np.eye(2) + 2 * A, atol=1e-14)

    def test_default_order(self):
        A = np.diag([-1.0, -2.0])
        p = resolvent_scenario(A, [[0, 1], [1]], 1.0, 1.0, 0.0, math.pi / 4, 3.0)
        np.testing.assert_allclose(np.diag(p.C), [2.0**-3, 3.0**-3], rtol=1e-14)

    def test_not_resolvent(self):
        with pytest.raises(NotResolvent):
            resolvent_scenario(np.diag([1.0, 2.0]), [[0, 1], [1]], 1.0, 1.0, 0.0, math.pi / 4, 3.0)

    def test_root_escape(self):
        with pytest.raises(RootEscape):
            resolvent_scenario(np.diag([-1.0, -2.0]), [[0, 1], [1]], 1.0, 1.0, 0.0, math.pi / 4, 1.0)

    def test_pencil_resolvent_is_analytic(self):
        p = resolvent_scenario(np.diag([-1.0, -2.0]), [[0, 1], [1]], 1.0, 1.0, 0.0, math.pi / 4, 3.0)
        for rep in resolvent_analyticity(p, [1.0, 1.0]):
            assert rep.passed and rep.observed <= 1e-8
