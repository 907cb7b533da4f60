"""Exception hierarchy for the converter toolkit."""
from typing import Any, List, Optional


class ConverterError(Exception):
    """Base exception for converter modelling errors."""
    pass


class ParameterDomainError(ConverterError, ValueError):
    """Raised when a parameter lies outside its physical domain."""

    def __init__(self, field: str, value: Any, message: str):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}: {message}")


class InfeasibleDriveError(ConverterError):
    """Raised when no drive strength can realize the requested cooperativity."""
    pass


class InfeasibleTargetError(ConverterError):
    """Raised when a design target lies outside the achievable region."""

    def __init__(self, message: str, achievable: Optional[float] = None):
        self.achievable = achievable
        super().__init__(message)


class GridError(ConverterError, ValueError):
    """Raised for degenerate grids and malformed argument lists."""
    pass


class FitConvergenceError(ConverterError):
    """Raised when a least-squares fit fails to converge."""

    def __init__(self, message: str, best: Any = None, history: Optional[List[float]] = None):
        self.best = best
        self.history = history or []
        super().__init__(message)


class DataFileError(ConverterError):
    """Raised for unreadable or malformed data files."""
    pass
