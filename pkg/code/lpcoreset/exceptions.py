from typing import Any, List, Optional


class LpCoresetError(Exception):
    """
    Base class for every error raised by the lpcoreset package.
    """


# ------------------------------------------
# Input errors
# ------------------------------------------
class MatrixFormatError(LpCoresetError, ValueError):
    """Raised when a matrix is ragged, empty, non-finite or unparsable."""


class AllZeroMatrix(LpCoresetError, ValueError):
    """Raised when every entry of the input matrix is zero."""


class RankDeficient(LpCoresetError, ValueError):
    """Raised when an operation requires full column rank."""


class ShapeMismatch(LpCoresetError, ValueError):
    """Raised when a draw, plan or vector does not match the matrix it is applied to."""


class UnsupportedExponent(LpCoresetError, ValueError):
    """Raised when no procedure is implemented for the requested p."""


class ExponentOutOfRange(LpCoresetError, ValueError):
    """Raised when p lies outside the range an operation is defined on."""


class FeatureOverflow(LpCoresetError, ValueError):
    """Raised when a polynomial feature exceeds the finite float range."""


class InvalidScoreKind(LpCoresetError, ValueError):
    """Raised when a score vector of the wrong kind is passed to an operation."""


class ConfigError(LpCoresetError, ValueError):
    """Raised for invalid run configurations."""


# ------------------------------------------
# Numerical failures
# ------------------------------------------
class NumericalFailure(LpCoresetError, RuntimeError):
    """
    Base class for failures of an iterative or randomized procedure.
    """


class NoConvergence(NumericalFailure):
    """
    Raised when an iterative solver hits its iteration cap or stalls before its tolerance.

    Parameters:
    - message (str): Human readable description.
    - best (np.ndarray): Best iterate found.
    - residual (float): KKT residual at the best iterate.
    - row (int, optional): Row index for per-row solvers.
    """

    def __init__(
        self, message: str, best: Any = None, residual: float = float("nan"), row: Optional[int] = None
    ):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.row = row


class BudgetExhausted(NumericalFailure):
    """
    Raised when the alpha calibration search runs out of halvings.

    Carries the best-so-far alpha, draw and distortion report.
    """

    def __init__(self, message: str, best_alpha: float, draw: Any = None, report: Any = None):
        super().__init__(message)
        self.best_alpha = best_alpha
        self.draw = draw
        self.report = report


class RoundRetryExhausted(NumericalFailure):
    """
    Raised when a recursive sampling round fails on every retry seed.

    Carries the failing round index and the trace accumulated so far.
    """

    def __init__(self, message: str, round_index: int, trace: Optional[List[Any]] = None):
        super().__init__(message)
        self.round_index = round_index
        self.trace = trace or []
