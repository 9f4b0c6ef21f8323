"""Degenerate fractional Cauchy problems ``D^a P2(A) u = P1(A) u`` on periodic grids.

Two independent routes produce the solution: the literal truncated series
``sum_l z^{al}/Gamma(al+1) (M_l * cutoff * regularizer)(A) x'`` and a per-mode
matrix Mittag-Leffler evaluation ``E_a(z^a M(xi))``, with ``M = P2^{-1} P1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BranchCut, DiskTouchesCut, SingularSymbol, warn_tail
from .fractional_calculus import Trajectory, caputo
from .special_functions import ml_matrix
from .spectral_calculus import (
    FREQUENCY,
    PHYSICAL,
    SpectralField,
    SpectralGrid,
    apply_symbol_values,
    transform,
)
from .symbol_algebra import (
    CutoffSpec,
    PolynomialMatrix,
    RegularizerSpec,
    cutoff_radial,
    regularizer_many,
    singular_floor,
)

SERIES_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class ModelSpec:
    """Symbols ``P1``, ``P2``, order ``alpha`` and the data-preparing multipliers."""

    P1: PolynomialMatrix
    P2: PolynomialMatrix
    alpha: float
    regularizer: RegularizerSpec
    cutoff: CutoffSpec | None = None
    singular_set_desc: str = ""
    name: str = "custom"

    def __post_init__(self):
        if (self.P1.m, self.P1.n) != (self.P2.m, self.P2.n):
            raise ValueError("P1 and P2 must share m and n")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def m(self) -> int:
        return self.P1.m

    @property
    def n(self) -> int:
        return self.P1.n

    def weights(self, grid: SpectralGrid) -> np.ndarray:
        """``cutoff * regularizer`` on the lattice, flattened (FFT order)."""
        xis = grid.freq_lattice.reshape(-1, grid.n)
        r2 = np.sum(xis * xis, axis=1)
        w = regularizer_many(self.regularizer, r2)
        if self.cutoff is not None:
            w = w * cutoff_radial(self.cutoff, np.sqrt(r2))
        return w

    def check_grid(self, grid: SpectralGrid) -> np.ndarray:
        """Indices of active modes (nonzero weight); raises on uncovered singular modes."""
        if grid.n != self.n:
            raise ValueError(f"model has {self.n} frequency variables, grid has {grid.n}")
        xis = grid.freq_lattice.reshape(-1, grid.n)
        w = self.weights(grid)
        active = np.flatnonzero(w != 0.0)
        dets = np.abs(np.linalg.det(self.P2.eval_many(xis[active])))
        floors = np.array([singular_floor(self.P2, x) for x in xis[active]])
        bad = dets < floors
        if bad.any():
            raise SingularSymbol("singular mode outside the cutoff plateau", xis[active[np.argmax(bad)]])
        return active


@dataclass
class ModeData:
    """Symbols restricted to the active modes of a grid."""

    active: np.ndarray
    xis: np.ndarray
    weights: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    M: np.ndarray


def mode_data(model: ModelSpec, grid: SpectralGrid) -> ModeData:
    active = model.check_grid(grid)
    xis = grid.freq_lattice.reshape(-1, grid.n)[active]
    P1 = model.P1.eval_many(xis)
    P2 = model.P2.eval_many(xis)
    M = np.linalg.solve(P2, P1) if active.size else np.zeros((0, model.m, model.m), complex)
    return ModeData(active, xis, model.weights(grid)[active], P1, P2, M)


@dataclass
class SolutionBundle:
    """Raw and prepared data plus frequency-side values at the evaluation points.

    ``freq_values`` has shape ``(len(points), m, *grid.sizes)``.
    """

    model: ModelSpec
    raw_data: SpectralField
    prepared_data: SpectralField
    points: np.ndarray
    freq_values: np.ndarray
    route: str
    tail: float = 0.0
    terms: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def grid(self) -> SpectralGrid:
        return self.raw_data.grid

    def field(self, k: int, space: str = PHYSICAL) -> SpectralField:
        f = SpectralField(self.grid, self.freq_values[k], FREQUENCY)
        return f if space == FREQUENCY else transform(f, "inverse")

    def physical_values(self) -> np.ndarray:
        return np.stack([self.field(k).data for k in range(len(self.points))])

    def trajectory(self) -> Trajectory:
        """Frequency-side samples as a trajectory, valid for points ``k * dt``."""
        pts = self.points
        if len(pts) < 2 or np.any(pts.imag != 0) or pts[0] != 0:
            raise ValueError("a trajectory needs real, uniform points starting at 0")
        dt = float(pts[1].real)
        if not np.allclose(np.diff(pts.real), dt, rtol=1e-9, atol=0):
            raise ValueError("points are not uniformly spaced")
        return Trajectory(dt, self.freq_values.reshape(len(pts), -1))


def _as_frequency(f: SpectralField) -> SpectralField:
    return f if f.space == FREQUENCY else transform(f, "forward")


def prepare_data(model: ModelSpec, xprime: SpectralField) -> SpectralField:
    """``C_m x'``: multiply every frequency by ``cutoff * regularizer``."""
    if xprime.m != model.m:
        raise ValueError(f"data has {xprime.m} components, model needs {model.m}")
    f = _as_frequency(xprime)
    w = model.weights(f.grid)
    values = w[:, None, None] * np.eye(model.m)
    return apply_symbol_values(values, f)


def _power(z: complex, alpha: float, allow_cut: bool) -> complex:
    z = complex(z)
    if float(alpha).is_integer():
        return z ** int(alpha)
    if z.imag == 0 and z.real < 0:
        if not allow_cut:
            raise BranchCut(f"z={z} lies on the cut (-inf, 0) for alpha={alpha}")
        return cmath.exp(alpha * complex(math.log(-z.real), math.pi))
    if z == 0:
        return 0j
    return z**alpha


def _flat_active(f: SpectralField, active: np.ndarray) -> np.ndarray:
    return f.data.reshape(f.m, -1)[:, active].T  # (K, m)


def _scatter(model: ModelSpec, grid: SpectralGrid, active: np.ndarray, vals: np.ndarray) -> np.ndarray:
    out = np.zeros((model.m, grid.npoints), dtype=complex)
    out[:, active] = vals.T
    return out.reshape(model.m, *grid.sizes)


def solve_modewise(model: ModelSpec, xprime: SpectralField, points: Sequence[complex],
                   allow_cut: bool = False) -> SolutionBundle:
    """``u(z) = E_alpha(z^alpha M(xi)) x_hat(xi)`` mode by mode."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    prepared = prepare_data(model, xprime)
    md = mode_data(model, prepared.grid)
    x = _flat_active(prepared, md.active)
    out = np.empty((len(pts), model.m, *prepared.grid.sizes), dtype=complex)
    for k, z in enumerate(pts):
        scale = _power(z, model.alpha, allow_cut)
        if scale == 0:
            vals = x
        else:
            E = ml_matrix(model.alpha, md.M, scale)
            vals = np.einsum("kij,kj->ki", E, x)
        out[k] = _scatter(model, prepared.grid, md.active, vals)
    return SolutionBundle(model, xprime, prepared, pts, out, "modewise")


def default_truncation(model: ModelSpec, md: ModeData, T: float, tol: float = 1e-14) -> int:
    """Smallest ``L`` with ``(T^a ||M||_max)^L / Gamma(aL+1) < tol`` over the active modes."""
    if md.M.size == 0:
        return 1
    big = md.weights > 1e-16 * md.weights.max()
    mnorm = float(np.max(np.linalg.norm(md.M[big], ord=2, axis=(1, 2)))) if big.any() else 0.0
    x = (T ** model.alpha) * mnorm
    if x == 0:
        return 1
    L = 1
    while L * math.log(x) - math.lgamma(model.alpha * L + 1) >= math.log(tol):
        L += 1
        if L > 10_000:
            break
    return L


def solve_series(model: ModelSpec, xprime: SpectralField, points: Sequence[complex],
                 truncation: int | None = None, allow_cut: bool = False) -> SolutionBundle:
    """The truncated series route; ``truncation=None`` picks the default ``L``.

    The tail indicator is the norm of the last retained term relative to the
    accumulated sum (worst over points); a ``TailWarning`` is issued above
    ``SERIES_TAIL_TOL``.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    prepared = prepare_data(model, xprime)
    md = mode_data(model, prepared.grid)
    if truncation is None:
        T = float(np.max(np.abs(pts))) if pts.size else 0.0
        truncation = default_truncation(model, md, T)
    if truncation < 0:
        raise ValueError("truncation must be >= 0")
    scales = np.array([_power(z, model.alpha, allow_cut) for z in pts])
    v = _flat_active(prepared, md.active)  # M_l applied to the prepared data
    acc = np.zeros((len(pts),) + v.shape, dtype=complex)
    acc += v[None]
    last = np.zeros(len(pts))
    for l in range(1, truncation + 1):
        v = np.linalg.solve(md.P2, np.einsum("kij,kj->ki", md.P1, v)[..., None])[..., 0]
        coef = np.array([s**l for s in scales]) * math.exp(-math.lgamma(model.alpha * l + 1))
        term = coef[:, None, None] * v[None]
        acc += term
        last = np.linalg.norm(term.reshape(len(pts), -1), axis=1)
    denom = np.maximum(np.linalg.norm(acc.reshape(len(pts), -1), axis=1), 1e-300)
    tail = float(np.max(last / denom)) if (truncation > 0 and pts.size) else 0.0
    if tail > SERIES_TAIL_TOL:
        warn_tail(f"last series term has relative size {tail:.2e} (L={truncation})")
    out = np.stack([_scatter(model, prepared.grid, md.active, acc[k]) for k in range(len(pts))]) \
        if pts.size else np.zeros((0, model.m, *prepared.grid.sizes), complex)
    return SolutionBundle(model, xprime, prepared, pts, out, "series", tail=tail, terms=truncation)


def relative_difference(a: SolutionBundle, b: SolutionBundle) -> float:
    """Worst over points of ``||a - b|| / ||b||`` (frequency-side 2-norms)."""
    worst = 0.0
    for k in range(len(a.points)):
        diff = np.linalg.norm(a.freq_values[k] - b.freq_values[k])
        ref = np.linalg.norm(b.freq_values[k])
        worst = max(worst, diff / ref if ref > 0 else diff)
    return float(worst)


@dataclass(frozen=True)
class CheckReport:
    check: str
    observed: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)


def residual_check(bundle: SolutionBundle, mode: str = "analytic_derivative",
                   tolerance: float | None = None, t_min: float = 0.0) -> CheckReport:
    """Residual ``P2 D^a u - P1 u`` per active mode on a uniform real-time grid.

    ``analytic_derivative`` takes ``D^a u = M E_a(t^a M) x`` from an independent
    mode-wise evaluation of the raw data, so a wrong candidate ``u`` shows up;
    ``numeric_caputo`` differentiates the samples with the Caputo scheme.
    Both orderings of ``P2`` and ``D^a`` are formed and compared. Only nodes
    with ``t >= t_min`` enter the maximum; for non-integer ``alpha`` the
    scheme error does not decay at the first few nodes (``u - u(0) ~ t^alpha``).
    """
    model = bundle.model
    md = mode_data(model, bundle.grid)
    traj = bundle.trajectory()
    nt = len(traj)
    U = bundle.freq_values.reshape(nt, model.m, -1)[:, :, md.active].transpose(0, 2, 1)  # (t, K, m)
    P2U = np.einsum("kij,tkj->tki", md.P2, U)
    if mode == "analytic_derivative":
        ref = solve_modewise(model, bundle.raw_data, bundle.points)
        Uref = ref.freq_values.reshape(nt, model.m, -1)[:, :, md.active].transpose(0, 2, 1)
        DU = np.einsum("kij,tkj->tki", md.M, Uref)
        D_P2U = np.einsum("kij,tkj->tki", md.P2, DU)  # D^a (P2 u) = P2 M u, same algebra
        rows = traj.times >= t_min
    elif mode == "numeric_caputo":
        x0 = U[0]
        init = [x0.reshape(-1)] + [np.zeros(x0.size, complex)] * (math.ceil(model.alpha) - 1)
        DU = caputo(model.alpha, Trajectory(traj.dt, U.reshape(nt, -1)), init).values.reshape(U.shape)
        p0 = P2U[0]
        init2 = [p0.reshape(-1)] + [np.zeros(p0.size, complex)] * (math.ceil(model.alpha) - 1)
        D_P2U = caputo(model.alpha, Trajectory(traj.dt, P2U.reshape(nt, -1)), init2).values.reshape(U.shape)
        rows = (traj.times >= t_min) & (np.arange(nt) > 0)  # node 0 carries no derivative information
    else:
        raise ValueError(f"unknown residual mode {mode!r}")
    P2DU = np.einsum("kij,tkj->tki", md.P2, DU)
    P1U = np.einsum("kij,tkj->tki", md.P1, U)
    scale = max(float(np.max(np.abs(P1U))), float(np.max(np.abs(P2DU))), 1e-300)
    resid = float(np.max(np.abs(P2DU - P1U)[rows])) / scale
    order_gap = float(np.max(np.abs(P2DU - D_P2U)[rows])) / scale
    if tolerance is None:
        tolerance = 1e-10 if mode == "analytic_derivative" else 1e-5
    return CheckReport(f"residual_{mode}", resid, tolerance, resid <= tolerance,
                       {"ordering_gap": order_gap, "dt": traj.dt, "samples": nt, "t_min": t_min})


def initial_conditions_check(model: ModelSpec, xprime: SpectralField, h: float | None = None,
                             tolerance: float = 1e-8) -> CheckReport:
    """``u(0) = C_m x'`` and, for ``1 < alpha <= 2``, a vanishing first derivative at 0.

    For ``alpha = 2`` the symmetric quotient ``(u(h) - u(-h)) / 2h`` is used
    (``u`` depends on ``z**2``); otherwise the one-sided quotient along the
    positive axis behaves like ``h**(alpha-1)`` and is extrapolated to 0.
    The default step is ``1e-3`` for ``alpha = 2`` and ``1e-4`` otherwise.
    """
    at0 = solve_modewise(model, xprime, [0.0])
    prepared = at0.prepared_data.data
    scale = max(float(np.max(np.abs(prepared))), 1e-300)
    err0 = float(np.max(np.abs(at0.freq_values[0] - prepared))) / scale
    detail: dict = {"value_error": err0}
    passed = err0 <= 1e-12
    alpha = model.alpha
    if alpha <= 1:
        detail["derivative"] = "not applicable"
        return CheckReport("initial_conditions", err0, 1e-12, passed, detail)
    if h is None:
        h = 1e-3 if alpha == 2 else 1e-4
    if alpha == 2:
        b = solve_modewise(model, xprime, [h, -h])
        deriv = float(np.max(np.abs(b.freq_values[0] - b.freq_values[1]))) / (2 * h)
    else:
        b = solve_modewise(model, xprime, [h, h / 2])
        q1 = np.abs(b.freq_values[0] - prepared) / h
        q2 = np.abs(b.freq_values[1] - prepared) / (h / 2)
        ratio = 2.0 ** (alpha - 1)
        deriv = float(np.max(np.abs((ratio * q2 - q1) / (ratio - 1)))) if ratio != 1 else float(np.max(q2))
    rel = deriv / scale
    detail["derivative"] = rel
    passed = passed and rel <= tolerance
    return CheckReport("initial_conditions", max(err0, rel), tolerance, passed, detail)


def analyticity_check(evaluate: Callable[[complex], object], z0: complex, radius: float,
                      nodes: int = 32, branch_cut: bool = False,
                      tolerance: float = 1e-8) -> CheckReport:
    """Cauchy-integral reproduction test on the circle ``|z - z0| = radius``.

    The trapezoid rule reproduces ``u(w)`` at the centre and at four interior
    points ``z0 + (radius/3) e^{i k pi/2}``; non-analytic ``u`` (for example
    complex conjugation, which passes the centre test) fails at the latter.
    """
    z0 = complex(z0)
    if branch_cut:
        gap = abs(z0.imag) if z0.real <= 0 else abs(z0)
        if gap <= radius:
            raise DiskTouchesCut(f"disk |z - {z0}| <= {radius} meets (-inf, 0]")
    theta = 2 * np.pi * np.arange(nodes) / nodes
    ring = z0 + radius * np.exp(1j * theta)
    vals = np.array([np.atleast_1d(np.asarray(evaluate(z), dtype=complex)).ravel() for z in ring])
    targets = [z0] + [z0 + radius / 3 * cmath.exp(0.5j * math.pi * k) for k in range(4)]
    worst = 0.0
    for w in targets:
        kernel = radius * np.exp(1j * theta) / (ring - w) / nodes
        approx = kernel @ vals
        exact = np.atleast_1d(np.asarray(evaluate(w), dtype=complex)).ravel()
        err = float(np.max(np.abs(approx - exact))) / max(1.0, float(np.max(np.abs(exact))))
        worst = max(worst, err)
    return CheckReport("analyticity", worst, tolerance, worst <= tolerance,
                       {"z0": [z0.real, z0.imag], "radius": radius, "nodes": nodes})


def taylor_reconstruction_check(evaluate: Callable[[complex], object], radius: float = 5.0,
                                samples: int = 64, probe: complex = 1.0 + 0.5j,
                                tolerance: float = 1e-8) -> CheckReport:
    """Entireness surrogate: Taylor coefficients from ``samples`` points on
    ``|z| = radius`` (by FFT) must reproduce the function inside the circle."""
    theta = 2 * np.pi * np.arange(samples) / samples
    ring = radius * np.exp(1j * theta)
    vals = np.array([np.atleast_1d(np.asarray(evaluate(z), dtype=complex)).ravel() for z in ring])
    coeffs = np.fft.fft(vals, axis=0) / samples  # c_k radius^k
    k = np.arange(samples)[:, None]
    approx = np.sum(coeffs * (probe / radius) ** k, axis=0)
    exact = np.atleast_1d(np.asarray(evaluate(probe), dtype=complex)).ravel()
    err = float(np.max(np.abs(approx - exact))) / max(1.0, float(np.max(np.abs(exact))))
    return CheckReport("taylor_reconstruction", err, tolerance, err <= tolerance,
                       {"radius": radius, "samples": samples})
