"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: bad input (ValueError/OSError) -> 1,
AmbiguityError/DegeneracyError -> 2, ConvergenceError -> 3.
"""

from __future__ import annotations


class SpinforgeError(Exception):
    """Base class for domain errors raised by this package."""


class AmbiguityError(SpinforgeError):
    """Raised when data admit two or more equally good interpretations.

    May carry a partial result (e.g. the list of tied candidates) in the
    ``result`` attribute so callers can still report it.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class DegeneracyError(SpinforgeError):
    """Raised when a geometry or level structure is too degenerate to resolve.

    Covers adiabatic-labeling failures (mixed level crossings) and
    rank-deficient fit geometries.
    """


class ConvergenceError(SpinforgeError):
    """Raised when an iterative fit or search fails to converge."""
