"""The acceptance suite: thirteen property checks across all modules.

Every criterion returns :class:`~degenfrac.reports.ReportLine` objects; the
``verify`` command and ``tests/test_acceptance.py`` both run them from here.
Randomness comes only from ``SuiteOptions.seed``, so equal options give
byte-identical reports.  Wall-clock timings are kept out of the report.
"""

from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import contour_solver as cs
from .degenerate_solver import (
    ModelSpec,
    analyticity_check,
    initial_conditions_check,
    relative_difference,
    residual_check,
    solve_modewise,
    solve_series,
)
from .errors import ConfigError, NumericalError
from .fractional_calculus import Trajectory, caputo, caputo_iterated
from .physics_models import DEFAULT_GRIDS, REGISTRY, SCALAR_ALPHA2, build_model, synthetic_scalar
from .reference import ml_reference
from .reports import AT_LEAST, AT_MOST, BELOW, ReportLine, encode, grid_label
from .special_functions import MLParams, mittag_leffler, ml_eval, stokes_distance
from .spectral_calculus import SpectralField, SpectralGrid, l1_norm_bound_check
from .symbol_algebra import (
    PolynomialMatrix,
    RegularizerSpec,
    recurrence_residual,
    regularizer_many,
    symbol_iterate,
)

EVAL_POINTS = (0.5, 1.0, 2.0, 1 + 1j, 2 * cmath.exp(1j * math.pi / 4))
AJ_EPSILONS = (0.1, 0.05, 0.025, 0.0125)
WAVE_MODELS = ("sobolev", "boussinesq", "gravity_gyroscopic")
# the Cauchy test needs 37 solves per model; 8^3 keeps it cheap in three dimensions
ANALYTICITY_GRIDS = {name: sizes if len(sizes) == 2 else (8, 8, 8) for name, sizes in DEFAULT_GRIDS.items()}


@dataclass(frozen=True)
class SuiteOptions:
    """``models`` restricts the per-model checks; ``grid`` overrides their grid."""

    seed: int = 0
    models: tuple[str, ...] = tuple(sorted(REGISTRY))
    grid: tuple[int, ...] | None = None
    tolerances: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        unknown = [m for m in self.models if m not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown model {unknown[0]!r}; valid models: {', '.join(sorted(REGISTRY))}")
        if self.grid is not None:
            dims = {len(DEFAULT_GRIDS[m]) for m in self.models}
            if dims != {len(self.grid)}:
                raise ConfigError(f"grid {grid_label(self.grid)} does not match the dimension of {self.models}")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"tolerance for {k!r} must be positive, got {v!r}")

    def grid_for(self, name: str, defaults: Mapping[str, tuple[int, ...]] = DEFAULT_GRIDS) -> tuple[int, ...]:
        return tuple(self.grid) if self.grid is not None else defaults[name]

    def rng(self, stream: int) -> np.random.Generator:
        """Independent generator per criterion so the selection does not shift draws."""
        return np.random.default_rng([self.seed, stream])


class _Emitter:
    """Collects lines for one criterion, applying tolerance overrides."""

    def __init__(self, opts: SuiteOptions, criterion: int):
        self.opts = opts
        self.criterion = criterion
        self.lines: list[ReportLine] = []

    def __call__(self, check: str, anchor: str, observed: float, tolerance: float,
                 relation: str = AT_MOST, model: str = "-", grid: str = "-", **detail) -> None:
        tol = self.opts.tolerances.get(check, tolerance)
        self.lines.append(ReportLine.compare(check, anchor, observed, tol, relation, model=model, grid=grid,
                                             seed=self.opts.seed, criterion=self.criterion, detail=detail))


def _observed_orders(errors: Sequence[float]) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


# -- 1: Mittag-Leffler closed forms ----------------------------------------

def _expm1(z: np.ndarray) -> np.ndarray:
    """``exp(z) - 1`` without cancellation near 0."""
    x, y = z.real, z.imag
    return np.exp(x) * (-2 * np.sin(y / 2) ** 2 + 1j * np.sin(y)) + np.expm1(x)


def ml_identities(opts: SuiteOptions, emit: _Emitter) -> None:
    rng = opts.rng(1)
    z = 10 * np.sqrt(rng.uniform(0, 1, 200)) * np.exp(1j * rng.uniform(-np.pi, np.pi, 200))
    weight = np.exp(np.abs(z))
    e1 = mittag_leffler(z, 1.0)
    e2 = mittag_leffler(-(z * z), 2.0)
    e12 = mittag_leffler(z, 1.0, 2.0)
    ref12 = _expm1(z) / np.where(z != 0, z, 1.0)
    ref12[z == 0] = 1.0
    emit("ml_exp", "E_1(z) = exp(z)", np.max(np.abs(e1 - np.exp(z)) / weight), 1e-12, samples=200)
    emit("ml_cos", "E_2(-z^2) = cos(z)", np.max(np.abs(e2 - np.cos(z)) / weight), 1e-12, samples=200)
    emit("ml_e12", "E_{1,2}(z) = (exp(z) - 1)/z", np.max(np.abs(e12 - ref12) / weight), 1e-12, samples=200)


# -- 2: large-argument asymptotics against the extended-precision series ----

def _asymptotic_samples(rng: np.random.Generator, beta: float, count: int = 40) -> list[complex]:
    out = []
    while len(out) < count:
        z = cmath.rect(rng.uniform(30.0, 60.0), rng.uniform(-math.pi, math.pi))
        if stokes_distance(z, beta) < 0.2:
            continue
        arg = cmath.phase(z)
        # values beyond double range have no relative error to speak of
        if abs(arg / beta) < math.pi / 2 and abs(z) ** (1 / beta) * math.cos(arg / beta) > 690:
            continue
        out.append(z)
    return out


def ml_asymptotics(opts: SuiteOptions, emit: _Emitter) -> None:
    rng = opts.rng(2)
    for beta in (0.5, 1.0, 1.5):
        for gamma in (1.0, 2.0):
            p = MLParams(beta, gamma)
            worst = 0.0
            for z in _asymptotic_samples(rng, beta):
                ref = ml_reference(beta, gamma, z)
                worst = max(worst, abs(ml_eval(p, z) - ref) / abs(ref))
            emit(f"ml_asymptotic_b{beta:g}_g{gamma:g}", "E_{beta,gamma}(z), 30 <= |z| <= 60",
                 worst, 1e-6, samples=40, beta=beta, gamma=gamma)


# -- 3: Caputo power rule, eigen-relation and iterate separation ------------

def _sampled(func, n: int) -> Trajectory:
    return Trajectory.sample(func, 1.0 / n, n + 1)


def caputo_rules(opts: SuiteOptions, emit: _Emitter) -> None:
    levels = (128, 256, 512, 1024)
    for zeta in (0.5, 0.8, 1.2):
        ceil = math.ceil(zeta)
        # D^zeta t: the product rule integrates piecewise-linear data exactly
        u = _sampled(lambda t: t, 256)
        out = caputo(zeta, u, [0.0, 1.0][:ceil])
        t = u.times[1:]
        exact = t ** (1 - zeta) / math.gamma(2 - zeta) if zeta < 1 else np.zeros_like(t)
        emit(f"caputo_linear_z{zeta:g}", "D^zeta t = t^(1-zeta)/Gamma(2-zeta)",
             np.max(np.abs(out.values[1:, 0] - exact)), 1e-12, zeta=zeta)
        # power rule on t^k with k = ceil(zeta) + 1, the lowest power the scheme does not reproduce
        k = ceil + 1
        errs = []
        for n in levels:
            u = _sampled(lambda t: t**k, n)
            out = caputo(zeta, u, [0.0] * ceil)
            exact = math.gamma(k + 1) / math.gamma(k + 1 - zeta)
            errs.append(abs(out.values[-1, 0] - exact))
        orders = _observed_orders(errs)
        emit(f"caputo_power_order_z{zeta:g}", "D^zeta t^k = Gamma(k+1)/Gamma(k+1-zeta) t^(k-zeta)",
             float(np.min(orders)), (2 - zeta) - 0.2, AT_LEAST, zeta=zeta, power=k, errors=errs)
        errs = []
        for n in levels:
            u = _sampled(lambda t: mittag_leffler(-(t**zeta), zeta), n)
            out = caputo(zeta, u, [1.0, 0.0][:ceil])
            errs.append(abs(out.values[-1, 0] + u.values[-1, 0]))
        orders = _observed_orders(errs)
        emit(f"caputo_eigen_order_z{zeta:g}", "D^zeta E_zeta(lambda t^zeta) = lambda E_zeta(lambda t^zeta)",
             float(np.min(orders)), (2 - zeta) - 0.2, AT_LEAST, zeta=zeta, errors=errs)
    u = _sampled(lambda t: t, 1024)
    twice = caputo_iterated(0.6, 2, u)
    once = caputo_iterated(1.2, 1, u, [[0.0, 1.0]])
    interior = slice(1, -1)
    emit("iterated_half_squared", "(D^0.6)^2 t at t = 1", twice.values[-1, 0].real, 0.5, AT_LEAST)
    emit("iterated_full_order", "D^1.2 t at interior nodes", np.max(np.abs(once.values[interior])), 1e-10)
    gap = np.min(np.abs(twice.values[interior, 0]) - np.abs(once.values[interior, 0]))
    emit("iterated_separation", "(D^0.6)^2 t != D^1.2 t at interior nodes", gap, 0.5, AT_LEAST)


# -- 4: symbol recurrence ---------------------------------------------------

def random_dense_symbols(rng: np.random.Generator, m: int = 3, n: int = 2,
                         deg: int = 2) -> tuple[PolynomialMatrix, PolynomialMatrix]:
    """Two dense ``m x m`` polynomial matrices with Gaussian complex coefficients."""
    monos = [(a, b) for a in range(deg + 1) for b in range(deg + 1 - a)]

    def poly():
        return PolynomialMatrix.from_rows(n, [[{e: complex(*rng.standard_normal(2)) for e in monos}
                                               for _ in range(m)] for _ in range(m)])

    return poly(), poly()


def _recurrence_worst(P1: PolynomialMatrix, P2: PolynomialMatrix, rng: np.random.Generator) -> float:
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(-4, 4, P1.n)
        scale = np.linalg.norm(P1(x)) + np.linalg.norm(P2(x))
        for l in range(9):
            Ml = symbol_iterate(P1, P2, x, l)
            worst = max(worst, recurrence_residual(P1, P2, x, l) / ((1 + np.linalg.norm(Ml)) * scale))
    return worst


def symbol_recurrence(opts: SuiteOptions, emit: _Emitter) -> None:
    anchor = "P2 M_{l+1} = P1 M_l, l <= 8"
    for k, name in enumerate(sorted(REGISTRY)):
        if name not in opts.models:
            continue
        spec = build_model(name).spec
        emit("symbol_recurrence", anchor, _recurrence_worst(spec.P1, spec.P2, opts.rng(400 + k)), 1e-9,
             model=name, points=100)
    rng = opts.rng(4)
    P1, P2 = random_dense_symbols(rng)
    emit("symbol_recurrence", anchor, _recurrence_worst(P1, P2, rng), 1e-9, model="random_m3", points=100)


# -- 5: series route against mode-wise route --------------------------------

def _data(opts: SuiteOptions, stream: int, grid: SpectralGrid, m: int) -> SpectralField:
    return SpectralField.random(grid, m, opts.rng(stream))


def route_equivalence(opts: SuiteOptions, emit: _Emitter) -> None:
    for k, name in enumerate(sorted(REGISTRY)):
        if name not in opts.models:
            continue
        spec = build_model(name).spec
        sizes = opts.grid_for(name)
        x = _data(opts, 500 + k, SpectralGrid(sizes), spec.m)
        a = solve_series(spec, x, EVAL_POINTS)
        b = solve_modewise(spec, x, EVAL_POINTS)
        emit("route_equivalence", "series sum_l z^(al)/Gamma(al+1) M_l C x' = E_a(z^a M) C x'",
             relative_difference(a, b), 1e-8, model=name, grid=grid_label(sizes), terms=a.terms)


# -- 6: PDE residual ----------------------------------------------------------

def _uniform(spec: ModelSpec, x: SpectralField, n: int, T: float = 1.0):
    return solve_modewise(spec, x, np.arange(n + 1) * (T / n))


def _numeric_targets(opts: SuiteOptions) -> list[tuple[str, ModelSpec, float, float]]:
    """``(label, spec, expected order, t_min)`` for the dt-halving study."""
    out = [(name, build_model(name).spec, 4.0, 0.0) for name in sorted(REGISTRY) if name in opts.models]
    waves = [w for w in WAVE_MODELS if w in opts.models] or ["sobolev"]
    out += [(f"{w}/{SCALAR_ALPHA2}", build_model(w, formulation=SCALAR_ALPHA2).spec, 4.0, 0.0) for w in waves]
    out.append(("synthetic_alpha0.7", synthetic_scalar(0.7), 2 - 0.7, 0.5))
    return out


def pde_residual(opts: SuiteOptions, emit: _Emitter) -> None:
    for k, name in enumerate(sorted(REGISTRY)):
        if name not in opts.models:
            continue
        spec = build_model(name).spec
        sizes = opts.grid_for(name)
        rep = residual_check(_uniform(spec, _data(opts, 600 + k, SpectralGrid(sizes), spec.m), 8))
        emit("pde_residual_analytic", "P2 D^a u = P1 u", rep.observed, 1e-10, model=name,
             grid=grid_label(sizes), ordering_gap=rep.detail["ordering_gap"])
    for k, (label, spec, expected, t_min) in enumerate(_numeric_targets(opts)):
        sizes = (8,) * spec.n
        x = _data(opts, 650 + k, SpectralGrid(sizes), spec.m)
        errs = [residual_check(_uniform(spec, x, n), "numeric_caputo", t_min=t_min).observed
                for n in (64, 128, 256)]
        emit("pde_residual_numeric_order", "P2 D^a u = P1 u with discrete Caputo",
             float(np.min(_observed_orders(errs))), expected - 0.2, AT_LEAST, model=label,
             grid=grid_label(sizes), alpha=spec.alpha, errors=errs)


# -- 7: initial conditions -------------------------------------------------

def initial_conditions(opts: SuiteOptions, emit: _Emitter) -> None:
    for k, name in enumerate(sorted(REGISTRY)):
        if name not in opts.models:
            continue
        spec = build_model(name).spec
        sizes = opts.grid_for(name)
        rep = initial_conditions_check(spec, _data(opts, 700 + k, SpectralGrid(sizes), spec.m))
        emit("initial_value", "u(0) = C_m x'", rep.detail["value_error"], 1e-12, model=name,
             grid=grid_label(sizes))
    waves = [w for w in WAVE_MODELS if w in opts.models] or ["sobolev"]
    for k, name in enumerate(waves):
        spec = build_model(name, formulation=SCALAR_ALPHA2).spec
        sizes = (8,) * spec.n
        rep = initial_conditions_check(spec, _data(opts, 750 + k, SpectralGrid(sizes), 1))
        label = f"{name}/{SCALAR_ALPHA2}"
        emit("initial_value", "u(0) = C_m x'", rep.detail["value_error"], 1e-12, model=label,
             grid=grid_label(sizes))
        emit("initial_velocity", "u'(0) = 0 for alpha = 2", rep.detail["derivative"], 1e-8, model=label,
             grid=grid_label(sizes))


# -- 8: analyticity ------------------------------------------------------------

def _resolvent_example() -> cs.PencilProblem:
    return cs.resolvent_scenario(np.diag([-1.0, -2.0]), [[0, 1], [1]], 1.0, 1.0, 0.0, math.pi / 4, 3.0)


def analyticity(opts: SuiteOptions, emit: _Emitter) -> None:
    for k, name in enumerate(sorted(REGISTRY)):
        if name not in opts.models:
            continue
        spec = build_model(name).spec
        sizes = opts.grid_for(name, ANALYTICITY_GRIDS)
        x = _data(opts, 800 + k, SpectralGrid(sizes), spec.m)
        rep = analyticity_check(lambda z: solve_modewise(spec, x, [z]).freq_values[0], 1.0, 0.4, nodes=32)
        emit("analyticity_modewise", "Cauchy reproduction of z -> u(z), |z - 1| = 0.4", rep.observed,
             1e-8, model=name, grid=grid_label(sizes))
    rng = opts.rng(8)
    pencils = [("resolvent_diag(-1,-2)", _resolvent_example()), ("scalar", cs.scalar_problem()),
               ("diagonal3x3", cs.diagonal_problem(seed=opts.seed))]
    for label, p in pencils:
        x = rng.standard_normal(p.m) + 1j * rng.standard_normal(p.m)
        for j, rep in enumerate(cs.resolvent_analyticity(p, x, count=3, nodes=32)):
            emit("analyticity_pencil", "Cauchy reproduction of lambda -> P^{-1} C x inside the sector",
                 rep.observed, 1e-8, model=label, disk=j, centre=complex(*rep.detail["z0"]),
                 radius=rep.detail["radius"])
    rep = analyticity_check(np.conj, 1.0, 0.4)
    emit("analyticity_detector", "conjugation is not analytic", rep.observed, 0.1, AT_LEAST)


# -- 9: contour construction ----------------------------------------------

def contour_residual(opts: SuiteOptions, emit: _Emitter) -> None:
    problems = [("scalar", cs.scalar_problem()), ("degenerate2x2", cs.degenerate_problem()),
                ("diagonal3x3", cs.diagonal_problem(seed=opts.seed))]
    for label, p in problems:
        X, Y = cs.scenario_data(p, seed=opts.seed)
        if label == "degenerate2x2":
            X[:, 1] = 0  # the algebraic component carries no data
        rep = cs.verify_pde(p, cs.build_contour(p), X, Y, epsilon=0.05)
        anchor = "sum_i A_i (D^zeta)^(q_i) u_eps = 0"
        emit("contour_pde_residual", anchor, rep.observed, 1e-10, model=label, zeta=p.zeta,
             nodes=rep.detail["nodes"])
        emit("contour_doubling_shift", "u_eps stable under node doubling", rep.detail["doubling_shift"],
             cs.DOUBLING_TOL, model=label)


# -- 10: the eps -> 0 initial limit ------------------------------------------

def initial_limit(opts: SuiteOptions, emit: _Emitter) -> None:
    rng = opts.rng(10)
    phase = cmath.exp(1j * rng.uniform(-math.pi, math.pi))
    anchor = "lim_eps (D^zeta)^l u_eps(0) = e^{-i phi} delta_{omega l} C x_omega"
    cases = [("scalar", cs.scalar_problem(0.25, 1.0, r=0.5, a=0.75), [[phase]]),
             ("degenerate2x2", cs.degenerate_problem(0.25, 1.0, r=0.5, a=0.75), [[phase, 0.0]])]
    for label, p, x in cases:
        rep = cs.initial_limit_check(p, cs.build_contour(p), x, AJ_EPSILONS, 0, 0)
        d = np.asarray(rep.deviations)
        emit("initial_limit_monotone", anchor, float(np.max(d[1:] / d[:-1])), 1.0, BELOW, model=label,
             deviations=rep.deviations)
        scale = max(float(np.linalg.norm(p.C @ np.asarray(x[0], dtype=complex))), 1e-300)
        emit("initial_limit_extrapolated", anchor, rep.limit_error / scale, 1e-4, model=label,
             epsilons=AJ_EPSILONS)
    p = cs.second_order_problem()
    quad = cs.build_contour(p)
    x = [[1.0], [rng.uniform(0.5, 1.5)]]
    for l in (0, 1):
        for omega in (0, 1):
            rep = cs.initial_limit_check(p, quad, x, AJ_EPSILONS, l, omega)
            if l == omega:
                scale = float(np.linalg.norm(p.C @ np.asarray(x[omega], dtype=complex)))
                emit("initial_limit_extrapolated", anchor, rep.limit_error / scale, 1e-4,
                     model=f"second_order l={l} omega={omega}")
            else:
                emit("initial_limit_off_diagonal", anchor, float(np.linalg.norm(rep.extrapolated)), 1e-4,
                     model=f"second_order l={l} omega={omega}")


# -- 11: admissible growth bound ------------------------------------------------

NU_TABLE = (((0, 1), 0.0), ((0, 1, 2), -1.0), ((0, 2), -1.0), ((0, 1, 1, 3), -2.0))


def nu_bound(opts: SuiteOptions, emit: _Emitter) -> None:
    for q, expected in NU_TABLE:
        got = cs.admissible_nu_bound(q)
        emit("nu_bound_table", "min over omega of -(q_n - 1 - omega + max q_j off S_omega)",
             abs(got - expected), 0.0, model=str(q), value=got, expected=expected)
    rng = opts.rng(11)
    worst = -math.inf
    for _ in range(200):
        n = int(rng.integers(1, 6))
        steps = rng.integers(0, 4, n)
        steps[0] = max(1, steps[0])
        q = (0, *np.cumsum(steps).tolist())
        worst = max(worst, cs.admissible_nu_bound(q) - (1 - q[-1]))
    emit("nu_bound_ceiling", "bound <= 1 - q_n", worst, 0.0, samples=200)


# -- 12: multiplier norm against the kernel L1 norm ------------------------

def norm_bound(opts: SuiteOptions, emit: _Emitter) -> None:
    cases = [
        ("gaussian", SpectralGrid((64, 64), extent=(16 * np.pi,) * 2),
         lambda xis: np.exp(-np.sum(xis**2, axis=1))),
        ("regularizer", SpectralGrid((256,), extent=(16 * np.pi,)),
         lambda xis: regularizer_many(RegularizerSpec(1.0, 2, 1), np.sum(xis**2, axis=1))),
    ]
    for k, (label, grid, symbol) in enumerate(cases):
        rep = l1_norm_bound_check(symbol, grid, trials=20, p=2, rng=opts.rng(1200 + k))
        emit("norm_bound_ratio", "||s(A)||_{2->2} <= ||F^{-1} s||_1", rep.ratio, 1.01, model=label,
             grid=grid_label(grid.sizes), trials=rep.trials)


# -- 13: determinism -------------------------------------------------------

DETERMINISM_SUBSET = (1, 4, 11, 12)


def determinism(opts: SuiteOptions, emit: _Emitter) -> None:
    """Re-run the cheap seeded criteria twice and compare the encoded reports."""
    first = encode(run_suite(opts, DETERMINISM_SUBSET).lines)
    second = encode(run_suite(opts, DETERMINISM_SUBSET).lines)
    emit("determinism", "same seed gives byte-identical report", float(first != second), 0.0,
         criteria=list(DETERMINISM_SUBSET), bytes=len(first))


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    budget: float
    run: Callable[[SuiteOptions, _Emitter], None]


CRITERIA: dict[int, Criterion] = {c.number: c for c in (
    Criterion(1, "Mittag-Leffler identities", 1.0, ml_identities),
    Criterion(2, "Mittag-Leffler asymptotics", 5.0, ml_asymptotics),
    Criterion(3, "Caputo rules", 10.0, caputo_rules),
    Criterion(4, "symbol recurrence", 5.0, symbol_recurrence),
    Criterion(5, "route equivalence", 60.0, route_equivalence),
    Criterion(6, "PDE residual", 60.0, pde_residual),
    Criterion(7, "initial conditions", 5.0, initial_conditions),
    Criterion(8, "analyticity", 10.0, analyticity),
    Criterion(9, "contour construction", 30.0, contour_residual),
    Criterion(10, "initial limit", 30.0, initial_limit),
    Criterion(11, "admissible nu bound", 1.0, nu_bound),
    Criterion(12, "norm bound", 5.0, norm_bound),
    Criterion(13, "determinism", 10.0, determinism),
)}


@dataclass
class SuiteResult:
    lines: list[ReportLine]
    timings: dict[int, float]
    errors: dict[int, str]

    @property
    def passed(self) -> bool:
        return not self.errors and all(line.passed for line in self.lines)

    def criterion_passed(self, number: int) -> bool:
        mine = [line for line in self.lines if line.criterion == number]
        return number not in self.errors and bool(mine) and all(line.passed for line in mine)


def run_suite(opts: SuiteOptions, criteria: Sequence[int] | None = None,
              on_done: Callable[[Criterion, list[ReportLine], float], None] | None = None) -> SuiteResult:
    """Run the selected criteria in ascending order.

    A :class:`NumericalError` inside a criterion becomes a failing
    ``numerical_error`` line carrying the exception context; the remaining
    criteria still run.
    """
    chosen = sorted(CRITERIA) if criteria is None else sorted(set(criteria))
    lines: list[ReportLine] = []
    timings: dict[int, float] = {}
    errors: dict[int, str] = {}
    for number in chosen:
        crit = CRITERIA[number]
        emit = _Emitter(opts, number)
        start = time.perf_counter()
        try:
            crit.run(opts, emit)
        except NumericalError as exc:
            errors[number] = f"{type(exc).__name__}: {exc}"
            context = {"error": type(exc).__name__, "message": str(exc)}
            xi = getattr(exc, "xi", None)
            if xi is not None:
                context["xi"] = np.asarray(xi, dtype=float)
            emit.lines.append(ReportLine("numerical_error", crit.name, 0.0, math.inf, False, seed=opts.seed,
                                         criterion=number, detail=context))
        timings[number] = time.perf_counter() - start
        lines.extend(emit.lines)
        if on_done is not None:
            on_done(crit, emit.lines, timings[number])
    return SuiteResult(lines, timings, errors)
