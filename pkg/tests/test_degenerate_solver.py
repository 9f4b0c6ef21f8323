from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from degenfrac.degenerate_solver import (
    ModelSpec,
    analyticity_check,
    initial_conditions_check,
    prepare_data,
    relative_difference,
    residual_check,
    solve_modewise,
    solve_series,
    taylor_reconstruction_check,
)
from degenfrac.errors import BranchCut, DiskTouchesCut, SingularSymbol, TailWarning
from degenfrac.physics_models import (
    DEFAULT_GRIDS,
    REGISTRY,
    SCALAR_ALPHA2,
    build_model,
    synthetic_scalar,
)
from degenfrac.spectral_calculus import FREQUENCY, SpectralField, SpectralGrid, transform

POINTS = [0.5, 1.0, 2.0, 1 + 1j, 2 * cmath.exp(1j * math.pi / 4)]


def random_data(grid, m, seed=0):
    return SpectralField.random(grid, m, np.random.default_rng(seed))


def single_mode(grid, xi, amplitude):
    """Frequency-side field with one nonzero lattice mode."""
    f = SpectralField.zeros(grid, len(amplitude), FREQUENCY)
    idx = grid.lattice_index(xi)
    for j, a in enumerate(amplitude):
        f.data[(j,) + idx] = a
    return f, idx


class TestModewise:
    def test_zero_time_is_prepared_data(self):
        spec = build_model("rossby").spec
        x = random_data(SpectralGrid((16, 16)), 1)
        b = solve_modewise(spec, x, [0.0])
        assert np.array_equal(b.freq_values[0], b.prepared_data.data)

    def test_rossby_phase_rotation(self):
        spec = build_model("rossby", {"beta": 1.0}).spec
        g = SpectralGrid((16, 16))
        x, idx = single_mode(g, (1, 2), [1.0])
        ts = [0.3, 1.0, 2.5]
        b = solve_modewise(spec, x, ts)
        w = b.prepared_data.data[(0,) + idx]
        for k, t in enumerate(ts):
            assert b.freq_values[k][(0,) + idx] == pytest.approx(w * cmath.exp(0.4j * t), rel=1e-13)

    def test_sobolev_cosine(self):
        spec = build_model("sobolev", {"omega": 3.0}).spec
        g = SpectralGrid((8, 8, 8))
        x, idx = single_mode(g, (0, 0, 1), [0.0, 1.0])
        ts = [0.2, 1.0, 1.7]
        b = solve_modewise(spec, x, ts)
        w = b.prepared_data.data[(1,) + idx]
        for k, t in enumerate(ts):
            assert b.freq_values[k][(1,) + idx] == pytest.approx(w * math.cos(3 * t), abs=1e-13)

    def test_plateau_modes_vanish(self):
        spec = build_model("boussinesq").spec
        x = random_data(SpectralGrid((8, 8, 8)), 2)
        b = solve_modewise(spec, x, POINTS)
        assert np.all(b.freq_values[:, :, 0, 0, 0] == 0)

    def test_branch_cut(self):
        spec = synthetic_scalar(0.7)
        x = random_data(SpectralGrid((8,)), 1)
        with pytest.raises(BranchCut):
            solve_modewise(spec, x, [-1.0])
        solve_modewise(spec, x, [-1.0], allow_cut=True)

    def test_uncovered_singular_mode(self):
        m = build_model("rossby").spec
        bare = ModelSpec(m.P1, m.P2, m.alpha, m.regularizer, None)
        with pytest.raises(SingularSymbol):
            solve_modewise(bare, random_data(SpectralGrid((8, 8)), 1), [1.0])

    def test_prepared_data_is_multiplier(self):
        spec = build_model("rossby").spec
        g = SpectralGrid((16, 16))
        x = random_data(g, 1)
        p = prepare_data(spec, x)
        w = spec.weights(g).reshape(g.sizes)
        np.testing.assert_array_equal(p.data[0], w * transform(x, "forward").data[0])

    def test_physical_values_round_trip(self):
        spec = build_model("rossby").spec
        b = solve_modewise(spec, random_data(SpectralGrid((8, 8)), 1), [1.0])
        back = transform(SpectralField(b.grid, b.physical_values()[0]), "forward")
        np.testing.assert_allclose(back.data, b.freq_values[0], atol=1e-13)


class TestSeries:
    def test_zero_truncation(self):
        spec = build_model("rossby").spec
        x = random_data(SpectralGrid((16, 16)), 1)
        b = solve_series(spec, x, [1.0, 2.0], truncation=0)
        assert np.array_equal(b.freq_values[0], b.prepared_data.data)
        assert np.array_equal(b.freq_values[1], b.prepared_data.data)

    def test_short_truncation_warns(self):
        spec = build_model("sobolev").spec
        with pytest.warns(TailWarning):
            solve_series(spec, random_data(SpectralGrid((8, 8, 8)), 2), [2.0], truncation=3)

    @pytest.mark.parametrize("name", sorted(REGISTRY))
    def test_route_equivalence(self, name):
        spec = build_model(name).spec
        x = random_data(SpectralGrid(DEFAULT_GRIDS[name]), spec.m)
        a = solve_series(spec, x, POINTS)
        b = solve_modewise(spec, x, POINTS)
        assert relative_difference(a, b) <= 1e-8

    def test_route_equivalence_rossby_16(self):
        spec = build_model("rossby").spec
        x = random_data(SpectralGrid((16, 16)), 1)
        assert relative_difference(solve_series(spec, x, [1.0]), solve_modewise(spec, x, [1.0])) <= 1e-8

    def test_scalar_sobolev_complex_time(self):
        spec = build_model("sobolev", formulation=SCALAR_ALPHA2).spec
        x = random_data(SpectralGrid((8, 8, 8)), 1)
        assert relative_difference(solve_series(spec, x, [1j]), solve_modewise(spec, x, [1j])) <= 1e-8

    def test_fractional_order(self):
        spec = synthetic_scalar(0.7, n=2)
        x = random_data(SpectralGrid((16, 16)), 1)
        pts = [0.5, 1.0, 1 + 1j]
        assert relative_difference(solve_series(spec, x, pts), solve_modewise(spec, x, pts)) <= 1e-8


def uniform_bundle(spec, grid, n, T=1.0, seed=0):
    return solve_modewise(spec, random_data(grid, spec.m, seed), np.arange(n + 1) * (T / n))


class TestResidual:
    @pytest.mark.parametrize("name", sorted(REGISTRY))
    def test_analytic(self, name):
        spec = build_model(name).spec
        rep = residual_check(uniform_bundle(spec, SpectralGrid(DEFAULT_GRIDS[name]), 8))
        assert rep.passed and rep.observed <= 1e-10
        assert rep.detail["ordering_gap"] <= 1e-12

    def test_numeric_rossby(self):
        spec = build_model("rossby").spec
        rep = residual_check(uniform_bundle(spec, SpectralGrid((16, 16)), 512), "numeric_caputo")
        assert rep.passed and rep.observed <= 1e-5

    def test_detector_fires(self):
        spec = build_model("rossby").spec
        b = uniform_bundle(spec, SpectralGrid((16, 16)), 8)
        idx = b.grid.lattice_index((1, 2))
        b.freq_values[1:, 0][(slice(None),) + idx] *= 1.01
        assert residual_check(b).observed > 1e-3

    @pytest.mark.parametrize("spec, expected, t_min", [
        (build_model("rossby").spec, 4.0, 0.0),
        (build_model("sobolev", formulation=SCALAR_ALPHA2).spec, 4.0, 0.0),
        (synthetic_scalar(0.7), 1.3, 0.5),
    ])
    def test_numeric_order(self, spec, expected, t_min):
        grid = SpectralGrid((8,) * spec.n)
        errs = [residual_check(uniform_bundle(spec, grid, n), "numeric_caputo", t_min=t_min).observed
                for n in (64, 128, 256)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= expected - 0.2)

    def test_rejects_nonuniform(self):
        spec = build_model("rossby").spec
        b = solve_modewise(spec, random_data(SpectralGrid((8, 8)), 1), [0.0, 0.1, 0.3])
        with pytest.raises(ValueError):
            residual_check(b)


class TestInitialConditions:
    @pytest.mark.parametrize("name", sorted(REGISTRY))
    def test_value(self, name):
        spec = build_model(name).spec
        rep = initial_conditions_check(spec, random_data(SpectralGrid((8,) * spec.n), spec.m))
        assert rep.passed and rep.detail["value_error"] <= 1e-12
        assert rep.detail["derivative"] == "not applicable"

    def test_scalar_sobolev_velocity(self):
        spec = build_model("sobolev", formulation=SCALAR_ALPHA2).spec
        rep = initial_conditions_check(spec, random_data(SpectralGrid((8, 8, 8)), 1))
        assert rep.passed and rep.detail["derivative"] <= 1e-8

    def test_fractional_between_one_and_two(self):
        spec = synthetic_scalar(1.5)
        rep = initial_conditions_check(spec, random_data(SpectralGrid((16,)), 1))
        assert rep.passed

    def test_fractional_below_one(self):
        rep = initial_conditions_check(synthetic_scalar(0.5), random_data(SpectralGrid((16,)), 1))
        assert rep.detail["derivative"] == "not applicable"


class TestAnalyticity:
    def test_exponential(self):
        assert analyticity_check(np.exp, 1.0, 0.5).observed <= 1e-12

    def test_conjugation_fails(self):
        assert analyticity_check(np.conj, 1.0, 0.4).observed >= 0.1

    def test_rossby_complex_time(self):
        spec = build_model("rossby").spec
        x = random_data(SpectralGrid((16, 16)), 1)
        rep = analyticity_check(lambda z: solve_modewise(spec, x, [z]).freq_values[0], 1.0, 0.4)
        assert rep.passed

    def test_fractional_off_cut(self):
        spec = synthetic_scalar(0.7)
        x = random_data(SpectralGrid((16,)), 1)
        rep = analyticity_check(lambda z: solve_modewise(spec, x, [z]).freq_values[0], 1.0, 0.4,
                                branch_cut=True)
        assert rep.passed

    @pytest.mark.parametrize("z0, radius", [(-1 + 0.3j, 0.5), (0.2, 0.4), (0.0, 0.1)])
    def test_disk_touches_cut(self, z0, radius):
        with pytest.raises(DiskTouchesCut):
            analyticity_check(np.exp, z0, radius, branch_cut=True)

    def test_entire_for_integer_order(self):
        spec = build_model("sobolev").spec
        x = random_data(SpectralGrid((8, 8, 8)), 2)
        rep = taylor_reconstruction_check(lambda z: solve_modewise(spec, x, [z]).freq_values[0])
        assert rep.passed
