"""Exception hierarchy shared across the package.

Each error belongs to one of four families, and every family maps to a
fixed process exit code used by the command-line front end:
2 = parse, 3 = invalid specification, 4 = optimization, 5 = inference.
"""


class CccApgarchError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParseError(CccApgarchError):
    """Malformed input file (CSV cell, config key, constraint row)."""

    exit_code = 2

    def __init__(self, message, row=None, column=None):
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
            message = message + loc
        super().__init__(message)
        self.row = row
        self.column = column


class NonPositivePrice(ParseError):
    """A price is <= 0, so its log-return is undefined."""


class InvalidSpecError(CccApgarchError):
    """A model specification violates its structural constraints."""

    exit_code = 3


class NonPositiveDefiniteCorrelation(InvalidSpecError):
    """The correlation matrix is not positive definite."""


class UnsupportedOrder(InvalidSpecError):
    """The requested operation is undefined for these model orders."""


class NonInvertibleBPolynomial(InvalidSpecError):
    """The volatility-lag polynomial cannot be inverted (spectral radius >= 1)."""


class OptimizationError(CccApgarchError):
    exit_code = 4


class ExplosivePath(OptimizationError):
    """The volatility recursion overflowed; carries the first offending time index."""

    def __init__(self, first_bad_index):
        super().__init__(f"volatility recursion exploded at t={first_bad_index}")
        self.first_bad_index = first_bad_index


class AllStartsInvalid(OptimizationError):
    """No multistart point produced a finite objective value."""


class NotEnoughData(OptimizationError):
    """Sample size does not exceed the number of free parameters."""


class StationarityVeto(OptimizationError):
    """A Monte Carlo design was rejected because its truth looks non-stationary."""


class InferenceError(CccApgarchError):
    exit_code = 5


class GradientAtInvalidPoint(InferenceError):
    """A derivative was requested where the objective is not finite."""


class IllConditionedJ(InferenceError):
    """The estimated Hessian is numerically singular."""

    def __init__(self, condition):
        super().__init__(f"Hessian estimate is ill-conditioned (condition ratio {condition:.3e})")
        self.condition = condition


class RankDeficientConstraints(InferenceError):
    """The constraint matrix of a Wald test does not have full row rank."""


class SingularConstraintCovariance(InferenceError):
    """The covariance of the constrained combination cannot be inverted."""
