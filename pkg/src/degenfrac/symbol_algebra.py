"""Polynomial-matrix symbols, their rational iterates, regularizers and cutoffs.

A symbol is a function of the frequency vector ``x`` in ``R^n``.  Polynomial
matrices are stored as, per entry, a map from exponent multi-index to complex
coefficient; rational iterates ``(P2^{-1} P1)^l`` are evaluated pointwise by
linear solves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import SingularSymbol, ValidationFailed

Monomials = Mapping[tuple[int, ...], complex]

SINGULAR_FLOOR = 1e-12


def _clean_entry(entry: Monomials, n: int) -> dict[tuple[int, ...], complex]:
    out: dict[tuple[int, ...], complex] = {}
    for eta, coef in entry.items():
        eta = tuple(int(e) for e in eta)
        if len(eta) != n or any(e < 0 for e in eta):
            raise ValueError(f"exponent {eta} is not a multi-index of length {n}")
        coef = complex(coef)
        if coef != 0:
            out[eta] = out.get(eta, 0j) + coef
    return {k: v for k, v in out.items() if v != 0}


@dataclass(frozen=True)
class PolynomialMatrix:
    """``m x m`` matrix of polynomials in ``n`` real variables.

    ``entries[i][j]`` maps exponent tuples ``eta`` to coefficients, so the
    entry is ``sum_eta c_eta x**eta``.
    """

    m: int
    n: int
    entries: tuple[tuple[dict, ...], ...]
    d: int = field(init=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if len(self.entries) != self.m or any(len(row) != self.m for row in self.entries):
            raise ValueError("entries must be an m x m nested sequence")
        rows = tuple(tuple(_clean_entry(e, self.n) for e in row) for row in self.entries)
        object.__setattr__(self, "entries", rows)
        deg = max((sum(eta) for row in rows for e in row for eta in e), default=0)
        object.__setattr__(self, "d", deg)
        exps, coefs = [], []
        for i, row in enumerate(rows):
            for j, e in enumerate(row):
                for eta, c in e.items():
                    exps.append(eta)
                    coefs.append((i, j, c))
        # flattened form used by the vectorised evaluator
        object.__setattr__(self, "_exps", np.array(exps, dtype=int).reshape(-1, self.n))
        object.__setattr__(self, "_idx", np.array([(i, j) for i, j, _ in coefs], dtype=int).reshape(-1, 2))
        object.__setattr__(self, "_coefs", np.array([c for *_, c in coefs], dtype=complex))

    @classmethod
    def scalar(cls, n: int, coeffs: Monomials) -> "PolynomialMatrix":
        return cls(1, n, ((dict(coeffs),),))

    @classmethod
    def from_rows(cls, n: int, rows) -> "PolynomialMatrix":
        rows = [[dict(e) for e in row] for row in rows]
        return cls(len(rows), n, tuple(tuple(r) for r in rows))

    @classmethod
    def constant(cls, n: int, matrix) -> "PolynomialMatrix":
        mat = np.asarray(matrix, dtype=complex)
        zero = (0,) * n
        return cls.from_rows(n, [[{zero: v} for v in row] for row in mat])

    def __call__(self, x) -> np.ndarray:
        return eval_poly_matrix(self, x)

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate at points ``xs`` of shape ``(K, n)``; returns ``(K, m, m)``."""
        xs = np.asarray(xs, dtype=float).reshape(-1, self.n)
        out = np.zeros((xs.shape[0], self.m, self.m), dtype=complex)
        if self._coefs.size == 0:
            return out
        powers = np.ones((xs.shape[0], self._exps.shape[0]))
        for axis in range(self.n):
            powers *= xs[:, axis:axis + 1] ** self._exps[:, axis]
        vals = powers * self._coefs
        np.add.at(out, (slice(None), self._idx[:, 0], self._idx[:, 1]), vals)
        return out

    def det(self, x) -> complex:
        return complex(np.linalg.det(eval_poly_matrix(self, x)))

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "entries": [[{"coeffs": [{"eta": list(eta), "re": c.real, "im": c.imag}
                                     for eta, c in sorted(e.items())]}
                         for e in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "PolynomialMatrix":
        n = int(doc["n"])
        rows = [[{tuple(c["eta"]): complex(c.get("re", 0.0), c.get("im", 0.0)) for c in e["coeffs"]}
                 for e in row] for row in doc["entries"]]
        pm = cls.from_rows(n, rows)
        if pm.m != int(doc["m"]):
            raise ValueError("declared m does not match the entries")
        return pm

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def eval_poly_matrix(P: PolynomialMatrix, x) -> np.ndarray:
    """Entrywise evaluation of ``P`` at one frequency vector."""
    x = np.asarray(x, dtype=float).reshape(P.n)
    return P.eval_many(x[None, :])[0]


def _det_degree_bound(P2: PolynomialMatrix) -> int:
    return P2.m * P2.d


def singular_floor(P2: PolynomialMatrix, x) -> float:
    """Threshold on ``|det P2(x)|`` below which ``x`` counts as singular."""
    norm = float(np.linalg.norm(np.asarray(x, dtype=float)))
    return SINGULAR_FLOOR * (1.0 + norm) ** _det_degree_bound(P2)


def _check_pair(P1: PolynomialMatrix, P2: PolynomialMatrix):
    if (P1.m, P1.n) != (P2.m, P2.n):
        raise ValueError("P1 and P2 must share m and n")


def _factor(P2: PolynomialMatrix, x) -> np.ndarray:
    A = eval_poly_matrix(P2, x)
    det = np.linalg.det(A)
    if abs(det) < singular_floor(P2, x):
        raise SingularSymbol("det P2 vanishes", np.asarray(x, dtype=float).reshape(-1))
    return A


def step_matrix(P1: PolynomialMatrix, P2: PolynomialMatrix, x) -> np.ndarray:
    """``M(x) = P2(x)^{-1} P1(x)`` by a linear solve."""
    _check_pair(P1, P2)
    A = _factor(P2, x)
    return np.linalg.solve(A, eval_poly_matrix(P1, x))


def symbol_iterate(P1: PolynomialMatrix, P2: PolynomialMatrix, x, l: int) -> np.ndarray:
    """``(P2(x)^{-1} P1(x))**l``, one solve per power."""
    if l < 0:
        raise ValueError("l must be >= 0")
    _check_pair(P1, P2)
    A = _factor(P2, x)
    B = eval_poly_matrix(P1, x)
    out = np.eye(P1.m, dtype=complex)
    for _ in range(l):
        out = np.linalg.solve(A, B @ out)
    return out


def recurrence_residual(P1: PolynomialMatrix, P2: PolynomialMatrix, x, l: int) -> float:
    """Frobenius norm of ``P2 M_{l+1} - P1 M_l`` at ``x``."""
    Ml = symbol_iterate(P1, P2, x, l)
    Ml1 = symbol_iterate(P1, P2, x, l + 1)
    r = eval_poly_matrix(P2, x) @ Ml1 - eval_poly_matrix(P1, x) @ Ml
    return float(np.linalg.norm(r))


@dataclass(frozen=True)
class RegularizerSpec:
    """``exp(-a |x|**(kprime*d))``; ``kprime`` must be even."""

    a: float
    kprime: int
    d: int

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.kprime < 2 or self.kprime % 2:
            raise ValueError("kprime must be an even integer >= 2")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @property
    def power(self) -> int:
        return self.kprime * self.d


def regularizer(spec: RegularizerSpec, x) -> float:
    r2 = float(np.sum(np.square(np.asarray(x, dtype=float))))
    # |x|**(k'd) with k' even is a polynomial in |x|^2
    return math.exp(-spec.a * r2 ** (spec.power // 2))


def regularizer_many(spec: RegularizerSpec, r2: np.ndarray) -> np.ndarray:
    """Vectorised regularizer from squared radii."""
    return np.exp(-spec.a * np.asarray(r2, dtype=float) ** (spec.power // 2))


def smooth_step(s):
    """``h(s) = e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)})`` clipped to [0, 1]; ``h(1/2) = 1/2``."""
    s = np.asarray(s, dtype=float)
    inner = (s > 0) & (s < 1)
    sc = np.where(inner, s, 0.5)
    with np.errstate(over="ignore"):
        # h = 1 / (1 + exp(1/s - 1/(1-s)))
        val = 1.0 / (1.0 + np.exp(1.0 / sc - 1.0 / (1.0 - sc)))
    out = np.where(s >= 1, 1.0, np.where(s <= 0, 0.0, val))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CutoffSpec:
    """Radial cutoff: 0 on ``|x| <= inner_radius``, 1 on ``|x| >= outer_radius``."""

    inner_radius: float
    outer_radius: float
    profile: str = "bump"

    def __post_init__(self):
        if not 0 < self.inner_radius < self.outer_radius:
            raise ValueError("need 0 < inner_radius < outer_radius")
        if self.profile != "bump":
            raise ValueError(f"unknown cutoff profile {self.profile!r}")


def cutoff_radial(spec: CutoffSpec, radius):
    s = (np.asarray(radius, dtype=float) - spec.inner_radius) / (spec.outer_radius - spec.inner_radius)
    return smooth_step(s)


def cutoff(spec: CutoffSpec, x) -> float:
    return float(cutoff_radial(spec, np.linalg.norm(np.asarray(x, dtype=float))))


def _entire_even_ratio(l: int, m: int, d: int, alpha: float, M2: float, n: int, kprime: int) -> float:
    """log of ``Gamma((2 M2 (l+1) m d + n)/(k' d))**(1/2l) / Gamma(alpha l + 1)**(1/l)``."""
    num = math.lgamma((2 * M2 * (l + 1) * m * d + n) / (kprime * d)) / (2 * l)
    den = math.lgamma(alpha * l + 1) / l
    return num - den


def choose_kprime(m: int, d: int, alpha: float, M2: float, n: int) -> int:
    """Smallest even ``k'`` with ``M2 m / k' < alpha``, checked by the ratio test.

    The ratio whose limit must vanish is evaluated (in logs) for
    ``l = 10..50`` and must decrease strictly.
    """
    if m < 1 or d < 1 or n < 1:
        raise ValueError("m, d, n must be >= 1")
    if not (alpha > 0 and M2 > 0):
        raise ValueError("alpha and M2 must be positive")
    k = 2 * (math.floor(M2 * m / alpha / 2) + 1)
    while M2 * m / k >= alpha:
        k += 2
    logs = [_entire_even_ratio(l, m, d, alpha, M2, n, k) for l in range(10, 51)]
    if any(b >= a for a, b in zip(logs, logs[1:])):
        raise ValidationFailed(f"ratio sequence does not decrease for k'={k}")
    return k


@dataclass(frozen=True)
class GrowthFit:
    M1: float
    M2: float
    raw_exponent: float


def fit_growth(P1: PolynomialMatrix, P2: PolynomialMatrix, rng: np.random.Generator,
               rays: int = 8, lmax: int = 6, radii=None, safety: float = 1.5) -> GrowthFit:
    """Least-squares fit of ``log ||M_l(x)||`` against ``l`` and ``l m d log(1+|x|)``.

    Points are taken along random rays at radii well outside the singular set.
    ``M2`` is the fitted exponent times ``safety``; ``M1`` is the smallest value
    making the bound hold at every sample once ``M2`` is fixed.
    """
    _check_pair(P1, P2)
    if radii is None:
        radii = np.geomspace(2.0, 64.0, 9)
    m, d = P1.m, max(P1.d, P2.d, 1)
    rows, rhs = [], []
    samples = []
    for _ in range(rays):
        u = rng.standard_normal(P1.n)
        u /= np.linalg.norm(u)
        for r in radii:
            x = r * u
            try:
                M = step_matrix(P1, P2, x)
            except SingularSymbol:
                continue
            Ml = np.eye(m, dtype=complex)
            for l in range(1, lmax + 1):
                Ml = Ml @ M
                nrm = np.linalg.norm(Ml, 2)
                if nrm == 0:
                    continue
                t = l * m * d * math.log1p(r)
                rows.append([l, t])
                rhs.append(math.log(nrm))
                samples.append((l, t, math.log(nrm)))
    if not rows:
        raise ValidationFailed("no usable samples for the growth fit")
    coef, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    raw = max(float(coef[1]), 0.0)
    M2 = max(raw * safety, 1e-3)
    logM1 = max(((y - M2 * t) / l for l, t, y in samples), default=0.0)
    return GrowthFit(M1=max(math.exp(logM1), 1.0), M2=M2, raw_exponent=raw)


SymbolFn = Callable[[np.ndarray], np.ndarray]
