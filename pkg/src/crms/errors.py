"""Exception types shared across the package."""

from __future__ import annotations


class CrmsError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(CrmsError, ValueError):
    """Operands live on incompatible spaces or grids."""


class DegenerateFormError(CrmsError, ValueError):
    """A form that must be non-degenerate is (numerically) singular."""


class CrmsValidationError(CrmsError, ValueError):
    """A three-form/complex-structure pair failed the CRMS axioms.

    Carries the full validation report so callers can inspect witnesses.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class FlowDivergenceError(CrmsError, RuntimeError):
    """The gradient flow produced non-finite values (blow-up).

    ``step`` is the index of the offending step; ``trace`` holds the partial
    trace accumulated before the blow-up, when available.
    """

    def __init__(self, message: str, step: int | None = None, trace=None):
        super().__init__(message)
        self.step = step
        self.trace = trace


class ConfigError(CrmsError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""
