"""Exception hierarchy.

Exceptions map onto the CLI exit codes: ConfigError -> 1, DataError and
subclasses -> 2, NumericalError and subclasses -> 3.
"""

from __future__ import annotations


class ThermokitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ThermokitError):
    """Invalid configuration, flags, or file layout."""


class DataError(ThermokitError):
    """Input data violates a documented contract."""


class ParseError(DataError):
    """A cell or row could not be parsed.

    Carries the 1-based data row index (header excluded) when known.
    """

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class MissingColumnError(DataError):
    """A column named in the mapping is absent from the file header."""


class InsufficientDataError(DataError):
    """Not enough observations to satisfy an operation's precondition."""


class NumericalError(ThermokitError):
    """A numerical procedure failed (non-convergence, rank deficiency)."""


class FitError(NumericalError):
    """Parameter identification failed on a segment or night set."""


class NoDecaySignalError(FitError):
    """Initial indoor-outdoor gap is non-positive; nothing to fit."""


class NonPhysicalFitError(FitError):
    """Fitted parameter has the wrong sign (e.g. balance-point slope <= 0)."""


class RankDeficiencyError(NumericalError):
    """Design matrix is rank deficient (empty or collinear cells)."""


class DegenerateClusterError(NumericalError):
    """Too few clusters for cluster-robust inference."""
