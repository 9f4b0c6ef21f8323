from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfrac.errors import SingularSymbol
from degenfrac.physics_models import REGISTRY, build_model
from degenfrac.symbol_algebra import (
    CutoffSpec,
    PolynomialMatrix,
    RegularizerSpec,
    choose_kprime,
    cutoff,
    eval_poly_matrix,
    fit_growth,
    recurrence_residual,
    regularizer,
    smooth_step,
    symbol_iterate,
)

ROSSBY_P2 = PolynomialMatrix.scalar(2, {(2, 0): -1, (0, 2): -1})
ROSSBY_P1 = PolynomialMatrix.scalar(2, {(0, 1): -1j})


def random_dense(rng, m=3, n=2, deg=2):
    monos = [(a, b) for a in range(deg + 1) for b in range(deg + 1 - a)]

    def entry():
        return {e: complex(*rng.standard_normal(2)) for e in monos}

    return PolynomialMatrix.from_rows(n, [[entry() for _ in range(m)] for _ in range(m)])


class TestPolynomialMatrix:
    def test_degree(self):
        P = PolynomialMatrix.scalar(3, {(1, 2, 0): 1.0, (0, 0, 1): 2.0, (4, 0, 0): 0.0})
        assert P.d == 3

    def test_bad_multi_index(self):
        with pytest.raises(ValueError):
            PolynomialMatrix.scalar(2, {(1, 0, 0): 1.0})

    def test_rossby_value(self):
        assert eval_poly_matrix(ROSSBY_P2, [1, 2])[0, 0] == -5
        assert ROSSBY_P2.det([1, 2]) == pytest.approx(-5, rel=1e-14)

    def test_constant_terms_at_zero(self):
        rng = np.random.default_rng(5)
        P = random_dense(rng)
        consts = np.array([[e.get((0, 0), 0) for e in row] for row in P.entries])
        np.testing.assert_array_equal(P([0, 0]), consts)

    def test_sobolev_p1(self):
        P1 = build_model("sobolev", {"omega": 3}).spec.P1
        np.testing.assert_array_equal(P1([0, 0, 2]), [[0, 36], [1, 0]])

    def test_json_round_trip(self):
        P = random_dense(np.random.default_rng(2))
        back = PolynomialMatrix.from_json(P.to_json())
        assert back == P
        assert back.dumps() == P.dumps()

    def test_eval_many_matches_pointwise(self):
        rng = np.random.default_rng(9)
        P = random_dense(rng)
        xs = rng.standard_normal((7, 2))
        np.testing.assert_allclose(P.eval_many(xs), np.stack([P(x) for x in xs]), rtol=1e-14)


class TestIterates:
    def test_zero_power(self):
        np.testing.assert_array_equal(symbol_iterate(ROSSBY_P1, ROSSBY_P2, [1, 2], 0), [[1]])

    def test_rossby_first_iterate(self):
        assert symbol_iterate(ROSSBY_P1, ROSSBY_P2, [1, 2], 1)[0, 0] == pytest.approx(0.4j, abs=1e-15)

    def test_singular(self):
        with pytest.raises(SingularSymbol) as info:
            symbol_iterate(ROSSBY_P1, ROSSBY_P2, [0, 0], 1)
        assert np.array_equal(info.value.xi, [0, 0])

    def test_sobolev_l5(self):
        spec = build_model("sobolev").spec
        x = [1, 1, 1]
        scale = np.linalg.norm(spec.P1(x)) + np.linalg.norm(spec.P2(x))
        assert recurrence_residual(spec.P1, spec.P2, x, 5) <= 1e-10 * scale

    @pytest.mark.parametrize("name", sorted(REGISTRY) + ["dense3"])
    def test_recurrence_l_le_8(self, name):
        rng = np.random.default_rng(11)
        if name == "dense3":
            P1, P2 = random_dense(rng), random_dense(rng)
        else:
            spec = build_model(name).spec
            P1, P2 = spec.P1, spec.P2
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(-4, 4, P1.n)
            scale = np.linalg.norm(P1(x)) + np.linalg.norm(P2(x))
            for l in range(9):
                Ml = symbol_iterate(P1, P2, x, l)
                bound = 1e-9 * (1 + np.linalg.norm(Ml)) * scale
                worst = max(worst, recurrence_residual(P1, P2, x, l) / bound)
        assert worst <= 1.0

    @settings(max_examples=30, deadline=None)
    @given(l1=st.integers(0, 4), l2=st.integers(0, 4), seed=st.integers(0, 10_000))
    def test_semigroup(self, l1, l2, seed):
        rng = np.random.default_rng(seed)
        P1, P2 = random_dense(rng), random_dense(rng)
        x = rng.uniform(-2, 2, 2)
        lhs = symbol_iterate(P1, P2, x, l1 + l2)
        rhs = symbol_iterate(P1, P2, x, l1) @ symbol_iterate(P1, P2, x, l2)
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * max(np.linalg.norm(lhs), 1.0)


class TestRegularizer:
    def test_origin(self):
        assert regularizer(RegularizerSpec(2.0, 4, 2), [0, 0]) == 1.0

    def test_unit(self):
        assert regularizer(RegularizerSpec(1.0, 2, 1), [1.0]) == pytest.approx(0.36787944117, rel=1e-10)

    def test_exponent(self):
        x = [1.2, 0.0]
        assert regularizer(RegularizerSpec(0.5, 4, 2), x) == pytest.approx(math.exp(-2.14990848), rel=1e-12)

    @pytest.mark.parametrize("kprime", [1, 3, 0])
    def test_odd_kprime(self, kprime):
        with pytest.raises(ValueError):
            RegularizerSpec(1.0, kprime, 1)


class TestCutoff:
    spec = CutoffSpec(0.5, 1.5)

    @pytest.mark.parametrize("r, expected", [(0.25, 0.0), (0.5, 0.0), (1.0, 0.5), (1.5, 1.0), (3.0, 1.0)])
    def test_plateaus_and_midpoint(self, r, expected):
        assert cutoff(self.spec, [r, 0.0]) == pytest.approx(expected, abs=1e-15)

    def test_monotone(self):
        s = np.linspace(0, 1, 201)
        assert np.all(np.diff(smooth_step(s)) >= 0)

    def test_symmetry(self):
        s = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(smooth_step(s) + smooth_step(1 - s), 1.0, atol=1e-15)

    def test_product_with_regularizer(self):
        reg = RegularizerSpec(0.1, 2, 2)
        for r in np.linspace(0, 4, 41):
            x = [r, 0.0]
            c = cutoff(self.spec, x) * regularizer(reg, x)
            assert c <= regularizer(reg, x)
            if r <= 0.5:
                assert c == 0.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            CutoffSpec(1.0, 0.5)


class TestKprime:
    @pytest.mark.parametrize("args, expected", [((2, 2, 1.0, 1.0, 2), 4), ((1, 1, 2.0, 1.0, 1), 2),
                                                ((3, 2, 0.5, 2.0, 3), 14)])
    def test_examples(self, args, expected):
        assert choose_kprime(*args) == expected

    def test_rejects(self):
        with pytest.raises(ValueError):
            choose_kprime(1, 1, 0.0, 1.0, 1)


def test_growth_fit_bounds_iterates():
    spec = build_model("sobolev").spec
    # the fit is a sample estimate, so it is checked with a modest margin
    fit = fit_growth(spec.P1, spec.P2, np.random.default_rng(0), rays=64)
    assert fit.M2 > 0 and fit.M1 > 0
    m, d = spec.m, max(spec.P1.d, spec.P2.d)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(-8, 8, 3)
        for l in range(1, 5):
            nrm = np.linalg.norm(symbol_iterate(spec.P1, spec.P2, x, l), 2)
            assert nrm <= fit.M1**l * (1 + np.linalg.norm(x)) ** (l * m * d * fit.M2) * 1.1**l
