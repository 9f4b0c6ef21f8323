"""Independent extended-precision reference values used by the acceptance suite."""

from __future__ import annotations

import mpmath as mp


def _ml_half(gamma: float, z: complex, digits: int = 40) -> complex:
    """``E_{1/2,gamma}`` for ``gamma`` in {1, 3/2, 2} via ``E_{1/2}(z) = exp(z^2) erfc(-z)``."""
    with mp.workdps(digits):
        zz = mp.mpc(z.real, z.imag)
        e1 = mp.exp(zz**2) * mp.erfc(-zz)
        if gamma == 1:
            return complex(e1)
        e32 = (e1 - 1) / zz
        if gamma == 1.5:
            return complex(e32)
        return complex((e32 - mp.rgamma(mp.mpf(1.5))) / zz)


def ml_reference(beta: float, gamma: float, z: complex) -> complex:
    """Mittag-Leffler series summed in extended precision.

    ``beta = 1/2`` with ``gamma`` in {1, 3/2, 2} goes through the
    error-function identity instead, which is far cheaper for large ``|z|``.

    Working precision grows with the largest term so the cancellation on
    the decaying side is absorbed.
    """
    z = complex(z)
    if beta == 0.5 and gamma in (1.0, 1.5, 2.0) and z != 0:
        return _ml_half(gamma, z)
    r = abs(z)
    peak = r ** (1.0 / beta)
    digits = 30 + int(peak / 2.0)
    with mp.workdps(digits):
        zz = mp.mpc(z.real, z.imag)
        b, g = mp.mpf(beta), mp.mpf(gamma)
        total = mp.mpc(0)
        eps = mp.mpf(10) ** (-digits)
        k = 0
        while True:
            x = b * k + g
            if not (x <= 0 and x == mp.floor(x)):
                term = zz**k * mp.rgamma(x)
                total += term
                if k > peak / beta + 10 and abs(term) < eps:
                    break
            k += 1
        return complex(total)
