"""Exception hierarchy shared across the package.

The three roots map onto the command-line exit codes: usage problems
(bad flags, infeasible configuration), data problems (malformed files,
misaligned or insufficient samples), and numeric failures.
"""


class SurrankError(Exception):
    """Base class for all package-specific errors."""


class UsageError(SurrankError):
    """Invalid or conflicting options."""


class ConfigurationError(UsageError):
    """A requested configuration is infeasible (e.g. a split that would leave a stage empty)."""


class DataError(SurrankError):
    """Problems with the data itself."""


class InvalidInputError(DataError):
    """Values outside the documented domain (non-finite entries, p-values outside [0, 1], ...)."""


class AlignmentError(DataError):
    """Response and candidate observations are not aligned subject-for-subject."""


class InsufficientDataError(DataError):
    """Too few observations for the requested statistic."""


class IngestError(DataError):
    """A delimited input file failed validation; the message carries file and row context."""


class NoSurrogatesSelectedError(DataError):
    """Screening selected an empty set, so no combined marker can be formed."""


class NumericError(SurrankError):
    """Numeric failure, e.g. a covariance matrix that is not positive definite."""
