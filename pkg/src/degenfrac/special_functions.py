"""Two-parameter Mittag-Leffler function for complex scalars and small matrices.

The series branch sums ``z**k / Gamma(beta*k + gamma)`` with compensated
summation; for large ``|z|`` the exponential-plus-inverse-power asymptotic
expansion takes over.  All fractional powers use the principal branch.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .errors import DomainError, NonConvergence, ValidationFailed

SCALAR_TERM_CAP = 10_000
MATRIX_TERM_CAP = 2_000

# log of the largest finite double
_LOG_MAX = 709.78
_EPS = 2.0**-53

# sigma close to pi/2 keeps subdominant exponentials that matter for relative accuracy
DEFAULT_SIGMA = 1.5
STOKES_MARGIN = 0.2


def _is_pole(x: float) -> bool:
    return x <= 0.0 and float(x).is_integer()


def reciprocal_gamma(x: float) -> float:
    """Return ``1/Gamma(x)``, exactly 0 at the poles ``x = 0, -1, -2, ...``."""
    x = float(x)
    if _is_pole(x):
        return 0.0
    if x < 171.0:
        return 1.0 / math.gamma(x)
    return math.exp(-math.lgamma(x))


def _log_reciprocal_gamma(x: float) -> tuple[float, float]:
    """``(log|1/Gamma(x)|, sign)``; sign is 0 at the poles."""
    if _is_pole(x):
        return -math.inf, 0.0
    sign = 1.0
    if x < 0.0 and math.floor(x) % 2 == 1:
        sign = -1.0
    return -math.lgamma(x), sign


@dataclass(frozen=True)
class MLParams:
    """Evaluation parameters for ``E_{beta,gamma}``.

    ``switch_radius=None`` selects a default from ``beta`` (see
    :func:`default_switch_radius`).  ``asymptotic_terms`` is an upper bound on
    the number of inverse-power terms; the sum is cut at its smallest term.
    ``handoff_tol`` is the relative tolerance the two branches must meet on
    the switching circle when ``validate`` is true.  ``sigma`` widens or
    narrows the set of exponential terms kept by the asymptotic branch.
    """

    beta: float
    gamma: float = 1.0
    series_tol: float = 1e-17
    switch_radius: float | None = None
    asymptotic_terms: int = 80
    sigma: float = DEFAULT_SIGMA
    handoff_tol: float = 1e-6
    validate: bool = False
    radius: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.asymptotic_terms < 2:
            raise ValueError("asymptotic_terms must be >= 2")
        if not 0.0 < self.sigma < math.pi / 2:
            raise ValueError("sigma must lie in (0, pi/2)")
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")
        radius = (default_switch_radius(self.beta) if self.switch_radius is None
                  else float(self.switch_radius))
        if radius <= 0:
            raise ValueError("switch_radius must be positive")
        object.__setattr__(self, "radius", radius)
        if self.validate:
            worst = handoff_error(self)
            if worst > self.handoff_tol:
                raise ValidationFailed(
                    f"series/asymptotic mismatch {worst:.3e} on |z|={radius} "
                    f"exceeds {self.handoff_tol:g} (beta={self.beta}, gamma={self.gamma})")


def default_switch_radius(beta: float) -> float:
    """Modulus at which :func:`ml_eval` hands over to the asymptotic branch.

    Both branches degrade in opposite directions: the series loses about
    ``exp(|z|**(1/beta))`` to cancellation off the positive axis, while the
    divergent inverse-power tail cannot beat ``exp(-|z|**(1/beta))``.  The
    crossover ``|z|**(1/beta) ~ 18`` balances the two; the radius is capped at
    25 (and at 15 below ``beta = 0.5``).
    """
    cap = 25.0 if beta >= 0.5 else 15.0
    return min(cap, 18.0 ** beta)


def _stokes_s_range(arg: float, beta: float, sigma: float) -> range:
    bound = beta * (math.pi / 2 + sigma)
    lo = math.ceil((-bound - arg) / (2 * math.pi))
    hi = math.floor((bound - arg) / (2 * math.pi))
    return range(lo, hi + 1)


def stokes_distance(z: complex, beta: float, sigma: float = DEFAULT_SIGMA) -> float:
    """Angular distance from ``arg z`` to the nearest direction where the set
    of exponential terms in the asymptotic expansion changes."""
    arg = cmath.phase(z)
    bound = beta * (math.pi / 2 + sigma)
    best = math.inf
    for s in range(-3 - int(beta), 4 + int(beta)):
        for edge in (bound, -bound):
            best = min(best, abs(arg + 2 * math.pi * s - edge))
    return best


def _series_sum(params: MLParams, z: complex) -> tuple[complex, float]:
    """Series value and a bound on its rounding error (``eps * sum |term|``)."""
    z = complex(z)
    beta, gamma = params.beta, params.gamma
    if z == 0:
        return complex(reciprocal_gamma(gamma)), 0.0
    logz = cmath.log(z)
    re_terms: list[float] = []
    im_terms: list[float] = []
    running = 0j
    mass = 0.0
    quiet = 0
    for k in range(SCALAR_TERM_CAP):
        x = beta * k + gamma
        if _is_pole(x):
            continue
        if x < 171.0 and k <= 100:
            term = z**k / math.gamma(x)
        else:
            lr, sign = _log_reciprocal_gamma(x)
            log_size = k * logz.real + lr
            if log_size > _LOG_MAX:
                raise NonConvergence(f"Mittag-Leffler series terms overflow at z={z}")
            term = sign * cmath.exp(k * logz + lr)
        re_terms.append(term.real)
        im_terms.append(term.imag)
        running += term
        mass += abs(term)
        if abs(term) < params.series_tol * (1.0 + abs(running)):
            quiet += 1
            if quiet == 3:
                value = complex(math.fsum(re_terms), math.fsum(im_terms))
                return value, 2.0 * _EPS * mass
        else:
            quiet = 0
    raise NonConvergence(
        f"Mittag-Leffler series did not converge in {SCALAR_TERM_CAP} terms at z={z}")


def ml_series(params: MLParams, z: complex) -> complex:
    """Power series of ``E_{beta,gamma}(z)`` with compensated summation."""
    return _series_sum(params, z)[0]


def _asymptotic_sum(params: MLParams, z: complex, check: bool = True) -> tuple[complex, float]:
    """Asymptotic value and the size of its first neglected inverse-power term."""
    z = complex(z)
    if check and abs(z) < params.radius * (1.0 - 1e-12):
        raise DomainError(f"|z|={abs(z):.6g} is below switch radius {params.radius}")
    beta, gamma = params.beta, params.gamma
    arg = cmath.phase(z)
    root = z ** (1.0 / beta)
    re_terms: list[float] = []
    im_terms: list[float] = []
    kept = _stokes_s_range(arg, beta, params.sigma)
    for s in kept:
        zs = root * cmath.exp(2j * math.pi * s / beta)
        if zs.real > _LOG_MAX:
            return complex(math.inf, 0.0), math.inf
        term = zs ** (1.0 - gamma) * cmath.exp(zs) / beta
        re_terms.append(term.real)
        im_terms.append(term.imag)
    # exponentials whose direction sits within STOKES_MARGIN of the cut-off
    # could as well be kept or dropped; their size measures that ambiguity
    bound = beta * (math.pi / 2 + params.sigma)
    boundary = 0.0
    for s in range(kept.start - 1, kept.stop + 1):
        if abs(abs(arg + 2 * math.pi * s) - bound) >= STOKES_MARGIN:
            continue
        zs = root * cmath.exp(2j * math.pi * s / beta)
        if zs.real > _LOG_MAX:
            boundary = math.inf
            break
        boundary += abs(zs ** (1.0 - gamma)) * math.exp(zs.real) / beta
    # 1/Gamma(gamma - beta j) oscillates through zeros, so the stopping rule
    # follows the envelope Gamma(1 - gamma + beta j)/pi from the reflection formula
    log_r = math.log(abs(z))
    last = math.inf
    neglected = 0.0
    terminating = float(beta).is_integer() and float(gamma).is_integer()
    for j in range(1, params.asymptotic_terms + 1):
        if terminating and gamma - beta * j <= 0:
            break  # every remaining coefficient is exactly zero
        x = 1.0 - gamma + beta * j
        if x > 0:
            envelope = math.exp(math.lgamma(x) - j * log_r) / math.pi
        else:
            envelope = abs(reciprocal_gamma(gamma - beta * j)) * math.exp(-j * log_r)
        if envelope > last or j == params.asymptotic_terms:
            neglected = envelope
            break
        last = envelope
        coef = reciprocal_gamma(gamma - beta * j)
        if coef == 0.0:
            continue
        term = -coef * z ** (-j)
        re_terms.append(term.real)
        im_terms.append(term.imag)
    return complex(math.fsum(re_terms), math.fsum(im_terms)), neglected + boundary


def ml_asymptotic(params: MLParams, z: complex) -> complex:
    """Large-``|z|`` expansion: exponential terms plus inverse powers.

    Sums ``(1/beta) Z_s**(1-gamma) exp(Z_s)`` over the integers ``s`` with
    ``|arg z + 2 pi s| < beta (pi/2 + sigma)``, ``Z_s = z**(1/beta) exp(2 pi i s/beta)``,
    minus ``z**(-j) / Gamma(gamma - beta j)`` for ``j = 1 .. l-1``.  The
    inverse-power sum stops early once its terms start to grow.
    """
    return _asymptotic_sum(params, z)[0]


# beyond this |z|**(1/beta) the series needs too many terms to be a fallback
_SERIES_FALLBACK_LIMIT = 60.0
_EXTENDED_LIMIT = 36.0
# error estimate (relative) above which the extended-precision series is used
_REFINE_TOL = 1e-12


def ml_eval(params: MLParams, z: complex) -> complex:
    """``E_{beta,gamma}(z)``: series inside the switch radius, asymptotics outside.

    Each branch carries an error estimate: rounding in the series grows with
    its largest term, while the divergent inverse-power sum is capped near
    its smallest term.  Near the switch radius, whenever the preferred
    branch's estimate is not negligible against the value, the other branch
    is computed too (if cheap) and the one with the smaller estimate wins.
    """
    z = complex(z)
    if abs(z) < params.radius:
        value, err = _series_sum(params, z)
        if err <= 1e-14 * abs(value):
            return value
        a_value, a_err = _asymptotic_sum(params, z, check=False)
        if cmath.isfinite(a_value) and a_err < err:
            value, err = a_value, a_err
        return _refine(params, z, value, err)
    value, err = _asymptotic_sum(params, z)
    if not cmath.isfinite(value) or err <= 1e-14 * abs(value):
        return value
    if abs(z) ** (1.0 / params.beta) > _SERIES_FALLBACK_LIMIT:
        return value
    try:
        s_value, s_err = _series_sum(params, z)
    except NonConvergence:
        return value
    return _refine(params, z, *((s_value, s_err) if s_err < err else (value, err)))


def _refine(params: MLParams, z: complex, value: complex, err: float) -> complex:
    """Recompute with a double-double series when both branches are inaccurate.

    Between the regimes where the series is free of cancellation and where the
    asymptotic tail is short, neither branch reaches double precision; the
    series is then summed with about 32 significant digits.
    """
    if err <= _REFINE_TOL * abs(value) or abs(z) ** (1.0 / params.beta) > _EXTENDED_LIMIT:
        return value
    return _series_double_double_scalar(params, z)


# double-double arithmetic: a value is the unevaluated sum hi + lo
_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    v = s - a
    return s, (a - (s - v)) + (b - v)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    e = e + (al + bl)
    return _two_sum(s, e)


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return _two_sum(p, e)


def _cdd_mul(x, y):
    """Complex double-double product; operands are ``(re_hi, re_lo, im_hi, im_lo)``."""
    rr = _dd_mul(x[0], x[1], y[0], y[1])
    ii = _dd_mul(x[2], x[3], y[2], y[3])
    ri = _dd_mul(x[0], x[1], y[2], y[3])
    ir = _dd_mul(x[2], x[3], y[0], y[1])
    re = _dd_add(rr[0], rr[1], -ii[0], -ii[1])
    im = _dd_add(ri[0], ri[1], ir[0], ir[1])
    return re[0], re[1], im[0], im[1]


class _CoefficientTable:
    """``1/Gamma(beta k + gamma)`` split into double-double pairs, grown on demand."""

    def __init__(self, beta: float, gamma: float):
        self.beta, self.gamma = beta, gamma
        self.hi: list[float] = []
        self.lo: list[float] = []

    def upto(self, n: int) -> tuple[list[float], list[float]]:
        if len(self.hi) < n:
            with mpmath.workdps(40):
                beta, gamma = mpmath.mpf(self.beta), mpmath.mpf(self.gamma)
                for k in range(len(self.hi), n):
                    x = beta * k + gamma
                    c = mpmath.mpf(0) if _is_pole(float(x)) else mpmath.rgamma(x)
                    hi = float(c)
                    self.hi.append(hi)
                    self.lo.append(float(c - hi))
        return self.hi, self.lo


@lru_cache(maxsize=32)
def _coefficient_table(beta: float, gamma: float) -> _CoefficientTable:
    return _CoefficientTable(beta, gamma)


def _series_double_double_scalar(params: MLParams, z: complex) -> complex:
    """Scalar counterpart of :func:`_series_double_double` on Python floats."""
    table = _coefficient_table(params.beta, params.gamma)
    zz = (z.real, 0.0, z.imag, 0.0)
    power = (1.0, 0.0, 0.0, 0.0)
    total = (0.0, 0.0, 0.0, 0.0)
    quiet = 0
    hi, lo = table.upto(64)
    for k in range(SCALAR_TERM_CAP):
        if k >= len(hi):
            hi, lo = table.upto(2 * len(hi))
        term = _cdd_mul(power, (hi[k], lo[k], 0.0, 0.0))
        re = _dd_add(total[0], total[1], term[0], term[1])
        im = _dd_add(total[2], total[3], term[2], term[3])
        total = (re[0], re[1], im[0], im[1])
        power = _cdd_mul(power, zz)
        if math.hypot(term[0], term[2]) <= 1e-34 * (1.0 + math.hypot(total[0], total[2])):
            quiet += 1
            if quiet == 3:
                return complex(total[0] + total[1], total[2] + total[3])
        else:
            quiet = 0
    raise NonConvergence(f"double-double Mittag-Leffler series did not converge at z={z}")


def _series_double_double(params: MLParams, z: np.ndarray) -> np.ndarray:
    """Vectorized series summed in double-double arithmetic."""
    table = _coefficient_table(params.beta, params.gamma)
    zero = np.zeros(z.shape)
    zz = (z.real.copy(), zero, z.imag.copy(), zero)
    power = (np.ones(z.shape), zero, zero, zero)
    total = (zero, zero, zero, zero)
    quiet = np.zeros(z.shape, dtype=int)
    hi, lo = table.upto(64)
    for k in range(SCALAR_TERM_CAP):
        if k >= len(hi):
            hi, lo = table.upto(2 * len(hi))
        c = (np.full(z.shape, hi[k]), np.full(z.shape, lo[k]), zero, zero)
        term = _cdd_mul(power, c)
        re = _dd_add(total[0], total[1], term[0], term[1])
        im = _dd_add(total[2], total[3], term[2], term[3])
        total = (re[0], re[1], im[0], im[1])
        power = _cdd_mul(power, zz)
        size = np.hypot(term[0], term[2])
        quiet = np.where(size <= 1e-34 * (1.0 + np.hypot(total[0], total[2])), quiet + 1, 0)
        if np.all(quiet >= 3):
            return (total[0] + total[1]) + 1j * (total[2] + total[3])
    raise NonConvergence("double-double Mittag-Leffler series did not converge")


def handoff_error(params: MLParams, samples: int = 24) -> float:
    """Worst disagreement of the two branches on ``|z| = radius`` beyond their
    own error estimates, relative to the better-estimated value.

    Directions within ``STOKES_MARGIN`` of a Stokes direction, and points where the
    function overflows, are skipped.
    """
    radius = params.radius
    worst = 0.0
    for k in range(samples):
        arg = -math.pi + (k + 0.5) * 2 * math.pi / samples
        z = cmath.rect(radius, arg)
        if stokes_distance(z, params.beta, params.sigma) < STOKES_MARGIN:
            continue
        a, a_err = _asymptotic_sum(params, z, check=False)
        if not cmath.isfinite(a):
            continue
        s, s_err = _series_sum(params, z)
        ref = a if a_err < s_err else s
        gap = max(0.0, abs(a - s) - a_err - s_err)
        worst = max(worst, gap / max(abs(ref), 1e-300))
    return worst


@lru_cache(maxsize=64)
def _cached_params(beta: float, gamma: float) -> MLParams:
    return MLParams(beta=beta, gamma=gamma)


def mittag_leffler(z, beta: float, gamma: float = 1.0):
    """Convenience wrapper; accepts a scalar or an array of complex arguments."""
    params = _cached_params(float(beta), float(gamma))
    if np.isscalar(z):
        return ml_eval(params, z)
    return ml_eval_many(z, beta, gamma)


def _series_many(params: MLParams, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized series with the rounding estimate ``2 eps sum |term|``."""
    beta, gamma = params.beta, params.gamma
    total = np.zeros(z.shape, dtype=complex)
    mass = np.zeros(z.shape)
    logz = np.log(np.where(z == 0, 1.0, z))
    quiet = np.zeros(z.shape, dtype=int)
    for k in range(SCALAR_TERM_CAP):
        lr, sign = _log_reciprocal_gamma(beta * k + gamma)
        if sign == 0.0:
            continue
        term = sign * np.exp(k * logz + lr) if k else np.full(z.shape, sign * math.exp(lr), dtype=complex)
        if k:
            term = np.where(z == 0, 0.0, term)
        total += term
        size = np.abs(term)
        mass += size
        quiet = np.where(size < params.series_tol * (1.0 + np.abs(total)), quiet + 1, 0)
        if np.all(quiet >= 3):
            return total, 2.0 * _EPS * mass
    raise NonConvergence(f"Mittag-Leffler series did not converge in {SCALAR_TERM_CAP} terms")


def _asymptotic_many(params: MLParams, z: np.ndarray, log_scale: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized asymptotic branch returning ``E(z) exp(log_scale)`` and its error estimate
    (relative to the same scale)."""
    beta, gamma = params.beta, params.gamma
    arg = np.angle(z)
    root = z ** (1.0 / beta)
    bound = beta * (math.pi / 2 + params.sigma)
    value = np.zeros(z.shape, dtype=complex)
    boundary = np.zeros(z.shape)
    smax = int(math.ceil((bound + math.pi) / (2 * math.pi))) + 1
    scale_re = log_scale.real
    for s in range(-smax, smax + 1):
        shifted = np.abs(arg + 2 * math.pi * s)
        keep = shifted < bound
        near = np.abs(shifted - bound) < STOKES_MARGIN
        if not (keep.any() or near.any()):
            continue
        zs = root * cmath.exp(2j * math.pi * s / beta)
        with np.errstate(over="ignore", invalid="ignore"):
            term = zs ** (1.0 - gamma) * np.exp(zs + log_scale) / beta
            edge = np.abs(zs ** (1.0 - gamma)) * np.exp(zs.real + scale_re) / beta
        value += np.where(keep, term, 0.0)
        boundary += np.where(near, edge, 0.0)
    r = np.abs(z)
    log_r = np.log(r)
    last = np.full(z.shape, math.inf)
    active = np.ones(z.shape, dtype=bool)
    neglected = np.zeros(z.shape)
    terminating = float(beta).is_integer() and float(gamma).is_integer()
    inverse = np.zeros(z.shape, dtype=complex)
    zinv = 1.0 / z
    zpow = np.ones(z.shape, dtype=complex)
    for j in range(1, params.asymptotic_terms + 1):
        zpow = zpow * zinv
        if terminating and gamma - beta * j <= 0:
            break
        x = 1.0 - gamma + beta * j
        if x > 0:
            envelope = np.exp(math.lgamma(x) - j * log_r) / math.pi
        else:
            envelope = abs(reciprocal_gamma(gamma - beta * j)) * np.exp(-j * log_r)
        stop = active & ((envelope > last) | (j == params.asymptotic_terms))
        neglected = np.where(stop, envelope, neglected)
        active &= ~stop
        if not active.any():
            break
        last = envelope
        coef = reciprocal_gamma(gamma - beta * j)
        if coef != 0.0:
            inverse -= np.where(active, coef * zpow, 0.0)
    value += inverse * np.exp(log_scale)
    err = (neglected * np.exp(scale_re)) + boundary
    return value, err


def ml_eval_many(z, beta: float, gamma: float = 1.0, log_scale=None) -> np.ndarray:
    """Vectorized ``E_{beta,gamma}(z) * exp(log_scale)``.

    Follows the branch choice of :func:`ml_eval`; points where neither
    vectorized branch reaches a relative error estimate of ``1e-12`` are
    summed in double-double arithmetic.  ``log_scale`` lets huge values meet tiny
    prefactors without overflow.
    """
    params = _cached_params(float(beta), float(gamma))
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    ls = np.zeros(z.shape, dtype=complex) if log_scale is None else \
        np.broadcast_to(np.asarray(log_scale, dtype=complex), shape).ravel()
    out = np.zeros(z.shape, dtype=complex)
    err = np.full(z.shape, math.inf)
    inner = np.abs(z) < params.radius
    if inner.any():
        val, e = _series_many(params, z[inner])
        fac = np.exp(ls[inner])
        out[inner], err[inner] = val * fac, e * np.abs(fac)
    outer = ~inner | ((err > 1e-14 * np.abs(out)) & (np.abs(z) >= 0.5 * params.radius))
    if outer.any():
        val, e = _asymptotic_many(params, z[outer], ls[outer])
        better = e < err[outer]
        idx = np.flatnonzero(outer)[better]
        out[idx], err[idx] = val[better], e[better]
    with np.errstate(invalid="ignore"):
        bad = ~(err <= _REFINE_TOL * np.abs(out)) & (np.abs(z) ** (1.0 / params.beta) <= _EXTENDED_LIMIT)
    if bad.any():
        out[bad] = _series_double_double(params, z[bad]) * np.exp(ls[bad])
    return out.reshape(shape)


def _neumaier_add(total, comp, term):
    t = total + term
    big = np.abs(total) >= np.abs(term)
    comp = comp + np.where(big, (total - t) + term, (term - t) + total)
    return t, comp


def ml_matrix(alpha: float, M, scale: complex = 1.0, tol: float = 1e-17) -> np.ndarray:
    """Matrix Mittag-Leffler function ``E_alpha(scale * M)`` by its power series.

    ``M`` may carry leading batch dimensions, ``(..., m, m)``; the stopping
    rule is applied to the largest term norm across the batch.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    M = np.asarray(M, dtype=complex)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError("M must be square in its last two axes")
    if M.shape[-1] > 8:
        raise ValueError("ml_matrix is intended for m <= 8")
    eye = np.broadcast_to(np.eye(M.shape[-1], dtype=complex), M.shape)
    A = complex(scale) * M
    term = eye.copy()
    total_re, comp_re = term.real.copy(), np.zeros(M.shape)
    total_im, comp_im = term.imag.copy(), np.zeros(M.shape)
    quiet = 0
    for l in range(1, MATRIX_TERM_CAP):
        prev, cur = alpha * (l - 1) + 1.0, alpha * l + 1.0
        if cur < 171.0:
            ratio = math.gamma(prev) / math.gamma(cur)
        else:
            ratio = math.exp(math.lgamma(prev) - math.lgamma(cur))
        term = (term @ A) * ratio
        total_re, comp_re = _neumaier_add(total_re, comp_re, term.real)
        total_im, comp_im = _neumaier_add(total_im, comp_im, term.imag)
        size = np.max(np.abs(term), initial=0.0)
        ref = np.max(np.abs(total_re) + np.abs(total_im), initial=0.0)
        if size < tol * (1.0 + ref):
            quiet += 1
            if quiet == 3:
                return (total_re + comp_re) + 1j * (total_im + comp_im)
        else:
            quiet = 0
    raise NonConvergence(f"matrix Mittag-Leffler series did not converge in {MATRIX_TERM_CAP} terms")


def f_lambda(zeta: float, phi: float, lam: complex, z: complex) -> complex:
    """``z * E_{zeta,2}(z**zeta * lam * exp(i phi))``, the velocity-data kernel."""
    z = complex(z)
    if z.imag == 0.0 and z.real < 0.0:
        raise DomainError("f_lambda is evaluated off the cut (-inf, 0)")
    if z == 0:
        return 0j
    arg = z**zeta * complex(lam) * cmath.exp(1j * phi)
    return z * ml_eval(_cached_params(float(zeta), 2.0), arg)
