"""
Error Types

Exceptions raised by the numerical modules. The orchestration layer reports
ConfigurationError as a (None, error_message) pair (invalid input) and turns
the others into an aborted run (a failed check).
"""

from typing import Any, Optional


class FractionalOrliczError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FractionalOrliczError, ValueError):
    """An argument lies outside the domain of an operation."""


class RangeError(FractionalOrliczError, ValueError):
    """A bracketing search left the representable range."""


class ConfigurationError(FractionalOrliczError, ValueError):
    """Inconsistent inputs: grid mismatch, empty sampling plan, bad config."""


class MeanZeroError(FractionalOrliczError):
    """A Riesz potential was applied to a field with a nonzero mean."""


class OracleValidityError(FractionalOrliczError):
    """The quadrature oracle was asked for a field it cannot represent."""


class ConstraintError(FractionalOrliczError):
    """A field does not vanish outside the domain mask."""


class SolverStallError(FractionalOrliczError):
    """The line search could not decrease the energy."""

    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class ExperimentAbortedError(FractionalOrliczError):
    """An inner solve failed; the partial report is attached."""

    def __init__(self, message: str, partial_report: Optional[Any] = None):
        super().__init__(message)
        self.partial_report = partial_report
