"""Exception types raised across the package."""

from __future__ import annotations

import warnings


class DegenFracError(Exception):
    """Base class for all package errors."""


class NumericalError(DegenFracError):
    """Failure of a numerical procedure (maps to CLI exit code 3)."""


class NonConvergence(NumericalError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class InconsistentInitialData(DegenFracError, ValueError):
    pass


class SymbolEvaluationError(NumericalError):
    """A symbol could not be evaluated; ``xi`` holds the offending frequency."""

    def __init__(self, message: str, xi=None):
        super().__init__(message if xi is None else f"{message} at xi={list(xi)}")
        self.xi = None if xi is None else tuple(float(v) for v in xi)


class SingularSymbol(SymbolEvaluationError):
    pass


class ValidationFailed(NumericalError):
    pass


class WrongSpace(DegenFracError, ValueError):
    pass


class UnresolvedSymbol(NumericalError):
    pass


class BranchCut(DomainError):
    pass


class DiskTouchesCut(DomainError):
    pass


class BadExponents(DegenFracError, ValueError):
    pass


class EmptyInterval(DegenFracError, ValueError):
    pass


class PencilSingular(NumericalError):
    pass


class QuadratureUnderResolved(NumericalError):
    pass


class RootEscape(NumericalError):
    pass


class NotResolvent(DegenFracError, ValueError):
    pass


class UnknownModel(DegenFracError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class BadParams(DegenFracError, ValueError):
    pass


class ConfigError(DegenFracError, ValueError):
    pass


class TailWarning(UserWarning):
    """The last retained term of a truncated series is not negligible."""


def warn_tail(message: str) -> None:
    warnings.warn(message, TailWarning, stacklevel=3)
