"""
Exception hierarchy shared by every module.

Callers care about two families. Configuration problems (bad arguments,
out-of-band spectral parameters, mismatched dimensions, unsatisfied support
conditions) derive from ConfigurationError; numerical failures
(non-convergence, rank deficiency, degenerate backgrounds) derive from
NumericalError. The CLI maps them to exit codes 2 and 3.

Concrete error types live next to the code that raises them.
"""

from __future__ import annotations


class LatticeHelmholtzError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(LatticeHelmholtzError, ValueError):
    """Invalid input: the call cannot succeed without changing its arguments."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericalError(LatticeHelmholtzError, ArithmeticError):
    """A well-formed computation failed to reach its accuracy contract."""
