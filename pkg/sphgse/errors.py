"""Exception hierarchy for sphgse."""

from __future__ import annotations


class SphgseError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SphgseError, ValueError):
    """An input violates a documented invariant.

    Attributes:
        invariant: Short name of the violated invariant, echoed by the CLI.
    """

    def __init__(self, message: str, invariant: str = "") -> None:
        super().__init__(message)
        self.invariant = invariant


class DomainError(ValidationError):
    """Argument outside the domain of a function (e.g. t < 0, y <= 1)."""


class OrderError(ValidationError):
    """Derivative order outside 0..4."""


class SingularityError(ValidationError):
    """The structure function was evaluated where xi'' vanishes."""


class ShapeError(ValidationError):
    """Model does not have the shape an operation requires (e.g. not 2+p)."""


class ConvergenceError(SphgseError, RuntimeError):
    """An iterative method hit its iteration limit."""

    def __init__(self, message: str, iterations: int = 0) -> None:
        super().__init__(message)
        self.iterations = iterations


class ReductionInconclusive(SphgseError):
    """No parameter vector of the structured family produced a feasible certificate."""

    def __init__(self, message: str, best_gap: float, best_margin: float) -> None:
        super().__init__(message)
        self.best_gap = best_gap
        self.best_margin = best_margin
