"""Exception hierarchy shared by all leanreg modules.

Everything raised deliberately by the library derives from
:class:`LeanRegError`, so callers (and the CLI) can catch one base class
and map it to a nonzero exit code.
"""

from __future__ import annotations


class LeanRegError(Exception):
    """Base class for all leanreg errors."""


class DataError(LeanRegError):
    """Invalid input data (ingestion or validation)."""


class ColumnError(DataError):
    """A named column is missing from the input."""


class ParseError(DataError):
    """A cell could not be parsed; carries 1-based row and column name."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyInputError(DataError):
    """Input file or dataset contains no data rows."""


class DimensionError(LeanRegError):
    """Vector/matrix dimensions do not match the fitted model."""


class FamilyError(LeanRegError):
    """Operation not defined for the given model family, or the response
    lies outside the family's support."""


class SingularSystemError(LeanRegError):
    """Design or bread matrix is numerically singular.

    ``min_eigenvalue`` holds the offending eigenvalue of the second-moment
    matrix when known.
    """

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ConvergenceError(LeanRegError):
    """Iterative fit failed to converge; carries the last iterate."""

    def __init__(self, message, last_beta=None, score_norm=None, iterations=None):
        super().__init__(message)
        self.last_beta = last_beta
        self.score_norm = score_norm
        self.iterations = iterations


class SeparationError(ConvergenceError):
    """Quasi-separation detected while fitting a bernoulli-logit model."""


class DegreesOfFreedomError(LeanRegError):
    """Too few observations for the requested variance estimate."""


class ResamplingError(LeanRegError):
    """Base class for bootstrap / replication failures."""


class ExcessiveFailureError(ResamplingError):
    """More than the tolerated fraction of replicates failed.

    ``reasons`` maps failure descriptions to counts.
    """

    def __init__(self, message, reasons=None):
        super().__init__(message)
        self.reasons = dict(reasons or {})


class InsufficientDrawsError(ResamplingError):
    """Not enough retained replicates for the requested summary."""


class PopulationError(LeanRegError):
    """Invalid synthetic population."""


class CollinearPopulationError(PopulationError):
    """Population second-moment matrix is singular."""


class PopulationSchemaError(PopulationError):
    """Population definition file violates the schema; names the field."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(LeanRegError):
    """A numeric argument lies outside its admissible domain."""


class ZeroScaleError(DomainError):
    """All residuals are zero, so interval calibration is vacuous."""


class ZeroWeightError(LeanRegError):
    """All regressor values coincide: the pairwise-slope weight is zero."""


class FoldError(LeanRegError):
    """A cross-validation training fold is too small for a full-rank fit."""


class CoefficientIndexError(LeanRegError, IndexError):
    """Coefficient index out of range (or names the intercept where a
    proper regressor is required)."""
