"""Riemann-Liouville kernels, fractional integrals and Caputo derivatives on
uniform time grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InconsistentInitialData


@dataclass(frozen=True)
class Trajectory:
    """Uniform samples ``u(k*dt)``, ``k = 0..N-1``; ``values`` has shape ``(N, dim)``.

    ``flagged`` lists node indices whose values are not trustworthy (an
    integrable singularity sits there).
    """

    dt: float
    values: np.ndarray
    t0: float = 0.0
    flagged: tuple[int, ...] = field(default=())

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise ValueError("values must be (samples, dim)")
        if vals.shape[0] < 2:
            raise ValueError("a trajectory needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def sample(cls, func, dt: float, n: int) -> "Trajectory":
        """Sample ``func(t)`` (scalar or vector valued) at ``t = k*dt``."""
        t = dt * np.arange(n)
        vals = np.array([np.atleast_1d(func(tk)) for tk in t], dtype=complex)
        return cls(dt=dt, values=vals)


@dataclass(frozen=True)
class FracOrder:
    zeta: float

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError("fractional order must be positive")

    @property
    def ceil(self) -> int:
        return math.ceil(self.zeta)

    @property
    def is_integer(self) -> bool:
        return float(self.zeta).is_integer()


def g_kernel(zeta: float, t: float) -> float:
    """``t**(zeta-1) / Gamma(zeta)``."""
    if zeta == 0:
        raise DomainError("g_0 is the Dirac distribution; it has no pointwise value")
    if zeta < 0:
        raise DomainError("zeta must be non-negative")
    if not t > 0:
        raise DomainError("g_zeta is evaluated for t > 0")
    return t ** (zeta - 1.0) / math.gamma(zeta)


def _convolve_columns(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``out[k] = sum_{j<=k} weights[k-j] * values[j]`` for every column."""
    n = values.shape[0]
    out = np.empty_like(values)
    for c in range(values.shape[1]):
        out[:, c] = np.convolve(weights, values[:, c])[:n]
    return out


def frac_integral(alpha: float, u: Trajectory) -> Trajectory:
    """``(g_alpha * u)(t_k)`` by product integration, exact for piecewise-linear ``u``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n = len(u)
    k = np.arange(n, dtype=float)
    p = alpha + 1.0
    c = np.empty(n)
    c[0] = 1.0
    c[1:] = (k[1:] + 1) ** p - 2 * k[1:] ** p + (k[1:] - 1) ** p
    # first-node weight differs from the interior pattern
    a0 = np.zeros(n)
    a0[1:] = (k[1:] - 1) ** p - (k[1:] - alpha - 1) * k[1:] ** alpha
    vals = _convolve_columns(c, u.values)
    vals += np.outer(a0 - c, u.values[0])
    vals[0] = 0.0
    vals *= u.dt**alpha / math.gamma(alpha + 2.0)
    return Trajectory(dt=u.dt, values=vals, t0=u.t0, flagged=u.flagged)


def _fd_weights(x0: float, xs: np.ndarray, order: int) -> np.ndarray:
    """Fornberg's finite-difference weights for the ``order``-th derivative at ``x0``."""
    n = len(xs)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    c[i, s] = c1 * (s * c[i - 1, s - 1] - c5 * c[i - 1, s]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for s in range(mn, 0, -1):
                c[j, s] = (c4 * c[j, s] - s * c[j, s - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def finite_difference(values: np.ndarray, dt: float, order: int, accuracy: int = 4) -> np.ndarray:
    """``order``-th derivative of uniformly sampled columns.

    Interior nodes use centred stencils and the ends one-sided stencils, both
    of formal accuracy ``accuracy`` (so polynomials of degree below
    ``order + accuracy`` are differentiated exactly up to rounding).
    """
    n = values.shape[0]
    centred = 2 * ((order + 1) // 2) - 1 + accuracy
    one_sided = order + accuracy
    if n < one_sided:
        raise ValueError("too few samples for the requested derivative")
    half = centred // 2
    out = np.empty_like(values)
    cache: dict[tuple[int, int], np.ndarray] = {}
    for k in range(n):
        lo, w = k - half, centred
        if lo < 0 or lo + w > n:
            w = one_sided
            lo = min(max(k - w // 2, 0), n - w)
        key = (k - lo, w)
        if key not in cache:
            cache[key] = _fd_weights(float(k - lo), np.arange(w, dtype=float), order)
        out[k] = cache[key] @ values[lo:lo + w]
    return out / dt**order


def _l1_weights(beta: float, n: int) -> np.ndarray:
    j = np.arange(n, dtype=float)
    return (j + 1) ** (1.0 - beta) - j ** (1.0 - beta)


def _l1(beta: float, w: np.ndarray, dt: float) -> np.ndarray:
    """L1 approximation of the order-``beta`` Caputo derivative, ``0 < beta < 1``."""
    n = w.shape[0]
    diffs = np.zeros_like(w)
    diffs[1:] = w[1:] - w[:-1]
    out = _convolve_columns(_l1_weights(beta, n), diffs)
    return out * dt ** (-beta) / math.gamma(2.0 - beta)


def _check_initial(order: FracOrder, u: Trajectory, initial_derivs, tol: float):
    derivs = [np.atleast_1d(np.asarray(d, dtype=complex)) for d in initial_derivs]
    if len(derivs) < order.ceil:
        raise InconsistentInitialData(
            f"need {order.ceil} initial derivatives for order {order.zeta}, got {len(derivs)}")
    for d in derivs:
        if d.shape != (u.dim,):
            raise InconsistentInitialData("initial derivative has the wrong dimension")
    gap = np.max(np.abs(derivs[0] - u.values[0]))
    if gap > tol * (1.0 + np.max(np.abs(u.values[0]))):
        raise InconsistentInitialData(f"u(0) differs from initial data by {gap:.3e}")
    return derivs


def caputo(order: FracOrder | float, u: Trajectory, initial_derivs: Sequence,
           consistency_tol: float = 1e-8) -> Trajectory:
    """Caputo derivative of order ``zeta`` on a uniform grid.

    The Taylor jet ``sum u^(j)(0) t^j/j!`` (``j < ceil(zeta)``) is removed, the
    remainder's ``(ceil(zeta)-1)``-th derivative is taken by finite
    differences and the L1 product-integration rule applies the remaining
    fractional order.  Integer orders reduce to finite differences.
    """
    if not isinstance(order, FracOrder):
        order = FracOrder(float(order))
    derivs = _check_initial(order, u, initial_derivs, consistency_tol)
    n = order.ceil
    dt = u.dt
    if order.is_integer:
        vals = finite_difference(u.values, dt, n)
        return Trajectory(dt=dt, values=vals, t0=u.t0)
    t = u.times - u.t0
    jet = np.zeros_like(u.values)
    for j in range(n):
        jet += np.outer(t**j / math.factorial(j), derivs[j])
    v = u.values - jet
    if n > 1:
        w = finite_difference(v, dt, n - 1)
        w[0] = 0.0  # the jet removal makes the (n-1)-th derivative vanish at 0
    else:
        w = v
        w[0] = 0.0
    vals = _l1(order.zeta - (n - 1), w, dt)
    return Trajectory(dt=dt, values=vals, t0=u.t0)


def one_sided_derivatives(u: Trajectory, count: int) -> list[np.ndarray]:
    """``[u(0), u'(0), ...]`` estimated from the first samples (``count`` entries)."""
    out = [u.values[0].copy()]
    for j in range(1, count):
        w = j + 2
        weights = _fd_weights(0.0, np.arange(w, dtype=float), j)
        out.append(weights @ u.values[:w] / u.dt**j)
    return out


def caputo_iterated(order: FracOrder | float, p: int, u: Trajectory,
                    initial_derivs_per_stage: Sequence | None = None) -> Trajectory:
    """``(D^zeta)^p u`` by ``p`` successive Caputo derivatives.

    Stage ``k`` takes its initial data from ``initial_derivs_per_stage[k]``
    when given, otherwise from the stage input itself (value at node 0 and
    one-sided difference quotients).  For non-integer orders and ``p >= 2``
    node 0 is flagged, since the iterate is typically singular there.
    """
    if not isinstance(order, FracOrder):
        order = FracOrder(float(order))
    if p < 1:
        raise ValueError("p must be >= 1")
    stages = list(initial_derivs_per_stage or [])
    cur = u
    for k in range(p):
        given = stages[k] if k < len(stages) else None
        derivs = given if given is not None else one_sided_derivatives(cur, order.ceil)
        cur = caputo(order, cur, derivs)
    flagged = (0,) if (p >= 2 and not order.is_integer) else ()
    return Trajectory(dt=cur.dt, values=cur.values, t0=cur.t0, flagged=flagged)
