"""Custom exceptions for collocation solves."""

from typing import Optional, Tuple


class CollonetError(Exception):
    """Base exception for collonet errors."""

    exit_code = 1


class InvalidArgumentError(CollonetError, ValueError):
    """Raised when an argument has the wrong shape, order or range."""
    pass


class DegenerateGeometryError(CollonetError):
    """Raised when points coincide or lie closer than the allowed tolerance."""

    def __init__(self, message: str, pair: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.pair = pair


class SingularMatrixError(CollonetError):
    """Raised when the interpolation matrix is numerically not positive definite."""

    exit_code = 2

    def __init__(self, message: str, pivot_index: int, lam: Optional[float] = None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.lam = lam


class InvalidStartError(CollonetError):
    """Raised when the objective is not finite at the starting point."""

    exit_code = 2


class LineSearchError(CollonetError):
    """Raised when step shrinkage cannot find a finite objective value."""

    exit_code = 2


class ProblemFileError(CollonetError):
    """Raised when a problem, solution or points file cannot be read."""
    pass
