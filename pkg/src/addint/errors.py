"""Exception hierarchy for addint.

Every error raised on purpose by this package derives from AddintError so
callers can catch one type at the CLI boundary. Validation errors carry row
indices where available.
"""

from __future__ import annotations


class AddintError(Exception):
    """Base class for all addint errors."""


class SchemaError(AddintError):
    """A required column is missing or the schema itself is malformed."""


class ValidationError(AddintError):
    """A dataset value violates an invariant (bad cell, bad level, bad weight)."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class EmptyDataError(AddintError):
    """The input file contains no data rows."""


class SingularDesignError(AddintError):
    """Design matrix is rank deficient at the fitting tolerance."""


class DivergenceError(AddintError):
    """Model fit failed to converge; carries the last iterate."""

    def __init__(self, message: str, coefficients=None, iterations: int | None = None):
        super().__init__(message)
        self.coefficients = coefficients
        self.iterations = iterations


class ConfigurationError(AddintError):
    """Requested combination of families, kinds or flags is not supported."""


class UnsupportedCombinationError(ConfigurationError):
    """Exposure-kind / association-model combination with no closed form."""


class DegenerateVarianceError(AddintError):
    """Variance estimate is zero or negative; the test statistic is undefined."""


class DegenerateNuisanceError(AddintError):
    """A fitted baseline probability sits on the boundary {0, 1}."""


class InfeasibleReriError(AddintError):
    """No interaction coefficient attains the requested excess-risk target."""


class ScenarioError(AddintError):
    """A generative scenario is internally inconsistent or unsatisfiable."""


class BootstrapFailureError(AddintError):
    """Too many bootstrap replicates failed to produce a statistic."""
