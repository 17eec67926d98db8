"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: usage/domain problems exit 2, numerical
failures exit 4.
"""

from __future__ import annotations


class TraceError(Exception):
    """Base class for every error raised by this package."""


class UsageError(TraceError, ValueError):
    """Arguments are malformed or mutually inconsistent."""


class DomainError(TraceError, ValueError):
    """An input lies outside the supported mathematical domain."""


class PlanError(DomainError):
    """The requested (formula, dimension, m) combination is not trace class."""


class NotBelowSpectrumError(DomainError):
    """The spectral parameter is not below the spectrum of the interacting operator."""

    def __init__(self, message: str, mode: int | None = None):
        super().__init__(message)
        self.mode = mode


class NumericError(TraceError, ArithmeticError):
    """A numerical procedure failed (non-convergence, loss of accuracy)."""


class SingularityError(NumericError, ZeroDivisionError):
    """Division by a jet whose constant term vanishes (a pole was hit)."""

    def __init__(self, message: str, mode: int | None = None):
        super().__init__(message)
        self.mode = mode


class ConfigurationError(UsageError):
    """Oracle grid configuration violates its invariants."""
