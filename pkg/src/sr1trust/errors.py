"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes (config 2, data 3, numerical 4);
library callers can catch the same classes.
"""


class Sr1trustError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(Sr1trustError):
    """A run configuration violates its documented constraints."""


class DataError(Sr1trustError):
    """A dataset file is malformed or inconsistent."""


class NumericalError(Sr1trustError):
    """A numerical defect: a certificate, solve, or iteration failed."""


class RankDeficiencyError(NumericalError):
    """A factorization met a numerically rank-deficient matrix."""


class SingularMatrixError(NumericalError):
    """A linear solve hit a numerically singular matrix."""


class LineSearchError(NumericalError):
    """Every line-search probe returned a non-finite value."""
