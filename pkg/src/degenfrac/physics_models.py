"""Degenerate wave and vortex equations as frequency-side symbol models.

Symbols follow ``d/dx_j -> i xi_j`` and ``Delta -> -|xi|^2``; every model has
``det P2(xi) = 0`` only at ``xi = 0``, which the default cutoff excises.
Second-order-in-time equations come in two formulations: a scalar
``alpha = 2`` problem, and a first-order system for the state ``(u_t, u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .degenerate_solver import ModelSpec
from .errors import BadParams, UnknownModel
from .symbol_algebra import (
    CutoffSpec,
    PolynomialMatrix,
    RegularizerSpec,
    choose_kprime,
    fit_growth,
    step_matrix,
)

SCALAR_ALPHA2 = "scalar_alpha2"
MATRICIAL = "matricial_first_order"

DEFAULT_CUTOFF = CutoffSpec(0.5, 1.5)
# the regularizer equals 1/e at this frequency radius by default
DEFAULT_REG_RADIUS = 3.0


@dataclass(frozen=True)
class NamedModel:
    name: str
    params: dict
    formulation: str
    spec: ModelSpec
    dispersion_law: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)


def _lap3(c: complex = -1.0) -> dict:
    """``c * |xi|^2`` in three variables."""
    return {(2, 0, 0): c, (0, 2, 0): c, (0, 0, 2): c}


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return out


def _poly_add(*terms: dict) -> dict:
    out: dict = {}
    for t in terms:
        for e, c in t.items():
            out[e] = out.get(e, 0) + c
    return out


def _companion(stiffness: dict, damping: dict | None = None):
    """``-|xi|^2 v_t = damping v + stiffness u``, ``u_t = v`` for the state ``(v, u)``."""
    one = {(0, 0, 0): 1.0}
    P2 = PolynomialMatrix.from_rows(3, [[_lap3(-1.0), {}], [{}, one]])
    P1 = PolynomialMatrix.from_rows(3, [[damping or {}, stiffness], [one, {}]])
    return P1, P2


def _scalar_alpha2(stiffness: dict):
    return PolynomialMatrix.scalar(3, stiffness), PolynomialMatrix.scalar(3, _lap3(-1.0))


def _positive(params: dict, *names: str) -> None:
    for k in names:
        v = params.get(k)
        if v is None or not np.isfinite(v) or v <= 0:
            raise BadParams(f"parameter {k} must be a positive number, got {v!r}")


def _wave_law(freq2: Callable[[np.ndarray], np.ndarray], formulation: str):
    """Spectrum of ``M(xi)`` for ``u_tt = -freq2(xi) u``."""

    def law(xi):
        xi = np.asarray(xi, dtype=float)
        w2 = freq2(xi) / np.dot(xi, xi)
        if formulation == SCALAR_ALPHA2:
            return np.array([-w2], dtype=complex)
        w = math.sqrt(w2)
        return np.array([1j * w, -1j * w])

    return law


def _rossby(params, formulation):
    params = {"beta": 1.0, **params}
    _positive(params, "beta")
    if formulation not in (None, MATRICIAL):
        raise BadParams("the Rossby equation is first order in time")
    beta = params["beta"]
    P2 = PolynomialMatrix.scalar(2, {(2, 0): -1.0, (0, 2): -1.0})
    P1 = PolynomialMatrix.scalar(2, {(0, 1): -1j * beta})

    def law(xi):
        xi = np.asarray(xi, dtype=float)
        return np.array([1j * beta * xi[1] / np.dot(xi, xi)])

    return params, MATRICIAL, P1, P2, 1.0, law


def _wave_builder(defaults, needed, stiffness_fn, freq2_fn):
    def build(params, formulation):
        params = {**defaults, **params}
        _positive(params, *needed)
        formulation = formulation or MATRICIAL
        stiffness = stiffness_fn(params)
        if formulation == MATRICIAL:
            P1, P2 = _companion(stiffness)
            alpha = 1.0
        elif formulation == SCALAR_ALPHA2:
            P1, P2 = _scalar_alpha2(stiffness)
            alpha = 2.0
        else:
            raise BadParams(f"unknown formulation {formulation!r}")
        return params, formulation, P1, P2, alpha, _wave_law(lambda xi: freq2_fn(params, xi), formulation)

    return build


_sobolev = _wave_builder(
    {"omega": 3.0}, ("omega",),
    lambda p: {(0, 0, 2): p["omega"] ** 2},
    lambda p, xi: p["omega"] ** 2 * xi[2] ** 2)

_boussinesq = _wave_builder(
    {"N": 2.0}, ("N",),
    lambda p: {(2, 0, 0): p["N"] ** 2, (0, 2, 0): p["N"] ** 2},
    lambda p, xi: p["N"] ** 2 * (xi[0] ** 2 + xi[1] ** 2))

_gravity_gyroscopic = _wave_builder(
    {"N": 2.0, "omega": 3.0}, ("N", "omega"),
    lambda p: {(2, 0, 0): p["N"] ** 2, (0, 2, 0): p["N"] ** 2, (0, 0, 2): p["omega"] ** 2},
    lambda p, xi: p["N"] ** 2 * (xi[0] ** 2 + xi[1] ** 2) + p["omega"] ** 2 * xi[2] ** 2)


def _rotating_viscous(params, formulation):
    params = {"omega": 3.0, "nu": 0.05, **params}
    _positive(params, "omega", "nu")
    if formulation not in (None, MATRICIAL):
        raise BadParams("the viscous equation has a first time derivative; use the matricial form")
    nu, om = params["nu"], params["omega"]
    lap = _lap3(1.0)  # |xi|^2
    lap2 = _poly_mul(lap, lap)
    lap3 = _poly_mul(lap2, lap)
    damping = {e: 2 * nu * c for e, c in lap2.items()}
    stiffness = _poly_add({e: nu**2 * c for e, c in lap3.items()}, {(0, 0, 2): om**2})
    P1, P2 = _companion(stiffness, damping)

    def law(xi):
        xi = np.asarray(xi, dtype=float)
        r2 = float(np.dot(xi, xi))
        w = om * abs(xi[2]) / math.sqrt(r2)
        return np.array([-nu * r2 + 1j * w, -nu * r2 - 1j * w])

    return params, MATRICIAL, P1, P2, 1.0, law


REGISTRY: dict[str, Callable] = {
    "rossby": _rossby,
    "sobolev": _sobolev,
    "boussinesq": _boussinesq,
    "gravity_gyroscopic": _gravity_gyroscopic,
    "rotating_viscous": _rotating_viscous,
}

DEFAULT_GRIDS = {
    "rossby": (32, 32),
    "sobolev": (16, 16, 16),
    "boussinesq": (16, 16, 16),
    "gravity_gyroscopic": (16, 16, 16),
    "rotating_viscous": (16, 16, 16),
}


def default_regularizer(P1: PolynomialMatrix, P2: PolynomialMatrix, alpha: float,
                        seed: int = 0, reg_radius: float = DEFAULT_REG_RADIUS,
                        kprime: int | None = None) -> RegularizerSpec:
    """``k'`` from the fitted symbol growth, ``a`` so the regularizer is ``1/e`` at ``reg_radius``."""
    d = max(P1.d, P2.d, 1)
    if kprime is None:
        fit = fit_growth(P1, P2, np.random.default_rng(seed))
        kprime = choose_kprime(P1.m, d, alpha, fit.M2, P1.n)
    return RegularizerSpec(a=reg_radius ** (-(kprime * d)), kprime=kprime, d=d)


def build_model(name: str, params: dict | None = None, formulation: str | None = None,
                regularizer: RegularizerSpec | None = None,
                cutoff: CutoffSpec | None = None) -> NamedModel:
    """Registry lookup; unknown names raise :class:`UnknownModel` listing the registry."""
    try:
        builder = REGISTRY[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; valid models: {', '.join(sorted(REGISTRY))}") from None
    params, formulation, P1, P2, alpha, law = builder(dict(params or {}), formulation)
    reg = regularizer or default_regularizer(P1, P2, alpha)
    spec = ModelSpec(P1, P2, alpha, reg, cutoff or DEFAULT_CUTOFF, "K = {0}: det P2 = 0 only at xi = 0", name)
    return NamedModel(name, params, formulation, spec, law)


def synthetic_scalar(alpha: float = 0.7, n: int = 1, reg_radius: float = DEFAULT_REG_RADIUS) -> ModelSpec:
    """Non-degenerate scalar test model ``D^a (1 + |xi|^2) u = -|xi|^2 u`` (decaying modes)."""
    zero = (0,) * n
    sq = {tuple(2 if k == j else 0 for k in range(n)): 1.0 for j in range(n)}
    P2 = PolynomialMatrix.scalar(n, {zero: 1.0, **sq})
    P1 = PolynomialMatrix.scalar(n, {e: -c for e, c in sq.items()})
    reg = default_regularizer(P1, P2, alpha, reg_radius=reg_radius)
    return ModelSpec(P1, P2, alpha, reg, None, "K empty: det P2 >= 1", f"synthetic_alpha{alpha:g}")


def dispersion(model: NamedModel, xi) -> np.ndarray:
    """Eigenvalues of ``M(xi) = P2(xi)^{-1} P1(xi)``, sorted by imaginary then real part."""
    M = step_matrix(model.spec.P1, model.spec.P2, xi)
    ev = np.linalg.eigvals(M)
    return ev[np.lexsort((ev.real, ev.imag))]


def closed_form_dispersion(model: NamedModel, xi) -> np.ndarray:
    ev = np.asarray(model.dispersion_law(np.asarray(xi, dtype=float)), dtype=complex)
    return ev[np.lexsort((ev.real, ev.imag))]
