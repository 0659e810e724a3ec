import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional

import dask
import numpy as np
import scipy.linalg
from dask import delayed

from lpcoreset.exceptions import (
    InvalidScoreKind,
    NoConvergence,
    RankDeficient,
    UnsupportedExponent,
)
from lpcoreset.irls import kkt_residual, lp_min_constrained
from lpcoreset.matrix import DEFAULT_RANK_TOL, OrthonormalBasis, as_matrix, orthonormal_basis

logger = logging.getLogger(__name__)

SCORE_KINDS = ("leverage", "lp_sensitivity", "lewis")
ZERO_ROW_NORM = 1e-14
ROWS_PER_TASK = 256


# ------------------------------------------
# Score containers
# ------------------------------------------
@dataclass
class ScoreVector:
    """
    Per-row importance scores.

    Attributes:
    - values (np.ndarray): One nonnegative score per row.
    - kind (str): leverage, lp_sensitivity or lewis.
    - p (float): Exponent the scores were computed for.
    - tol (float): Solver tolerance the values are accurate to.
    - rank (int): Numerical rank of the scored matrix.
    """

    values: np.ndarray
    kind: str
    p: float
    tol: float
    rank: int

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise InvalidScoreKind(f"Unknown score kind {self.kind!r}.")
        if int(self.rank) < 1:
            raise ValueError(f"Score rank must be at least 1, got {self.rank}.")
        self.rank = int(self.rank)
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "p": float(self.p),
            "tol": float(self.tol),
            "values": [float(v) for v in self.values],
            "total": self.total,
            "rank": int(self.rank),
        }

    @classmethod
    def from_dict(cls, record: Dict[str, object]) -> "ScoreVector":
        if "rank" not in record:
            raise ValueError("Score record has no rank field.")
        values = np.asarray(record["values"], dtype=np.float64)
        return cls(
            values=values,
            kind=str(record["kind"]),
            p=float(record["p"]),
            tol=float(record["tol"]),
            rank=int(record["rank"]),
        )


@dataclass(frozen=True)
class TotalSensitivity:
    """
    Total l_p sensitivity with its provenance.

    Attributes:
    - value (float): Sum of the row scores.
    - p (float): Exponent.
    - n (int): Number of rows.
    - d (int): Rank of the scored matrix.
    """

    value: float
    p: float
    n: int
    d: int


def _require_kind(s: ScoreVector, *kinds: str) -> None:
    if s.kind not in kinds:
        raise InvalidScoreKind(f"Expected scores of kind {kinds}, got {s.kind!r}.")


# ------------------------------------------
# Leverage scores
# ------------------------------------------
def leverage_scores(A: np.ndarray, basis: Optional[OrthonormalBasis] = None) -> ScoreVector:
    """
    Computes tau_i = ||e_i^T U||_2^2 for an orthonormal basis U of col(A).

    Parameters:
    - A (np.ndarray): Nonzero input matrix.
    - basis (OrthonormalBasis, optional): Precomputed basis of A.

    Returns:
    - ScoreVector: Leverage scores summing to rank(A).
    """
    basis = basis or orthonormal_basis(A)
    values = np.clip(np.sum(basis.U**2, axis=1), 0.0, 1.0)
    return ScoreVector(values=values, kind="leverage", p=2.0, tol=DEFAULT_RANK_TOL, rank=basis.rank)


# ------------------------------------------
# l_p sensitivities
# ------------------------------------------
def _row_sensitivity(U: np.ndarray, i: int, p: float, tol: float, max_iter: int) -> float:
    u = U[i]
    norm_u = np.linalg.norm(u)
    if norm_u < ZERO_ROW_NORM:
        return 0.0
    if p == 2:
        return float(min(norm_u**2, 1.0))
    if U.shape[1] == 1:
        a = np.abs(U[:, 0])
        return float(min((a[i] / a.max()) ** p / np.sum((a / a.max()) ** p), 1.0))
    try:
        result = lp_min_constrained(U, u, p, tol=tol, max_iter=max_iter)
    except NoConvergence as e:
        e.row = i
        raise
    return float(np.clip(1.0 / result.objective, 0.0, 1.0))


def lp_sensitivity_row(
    A: np.ndarray,
    i: int,
    p: float,
    tol: float = 1e-8,
    max_iter: int = 500,
    basis: Optional[OrthonormalBasis] = None,
) -> float:
    """
    Computes sigma_i^p(A) = 1 / min { ||Ax||_p^p : [Ax](i) = 1 }.

    The minimization runs over basis coordinates z (Ax = Uz) with the Newton-IRLS
    kernel of `lpcoreset.irls`, which solves p = 1 as a linear program. Rows
    outside the column span get 0.

    Parameters:
    - A (np.ndarray): Input matrix.
    - i (int): Row index.
    - p (float): Exponent, 1 <= p < inf.
    - tol (float): KKT residual tolerance of the solver.
    - max_iter (int): Iteration cap.
    - basis (OrthonormalBasis, optional): Precomputed basis of A.

    Returns:
    - float: Sensitivity in [0, 1].
    """
    basis = basis or orthonormal_basis(A)
    if not 0 <= i < basis.U.shape[0]:
        raise IndexError(f"Row {i} out of range for {basis.U.shape[0]} rows.")
    return _row_sensitivity(basis.U, i, p, tol, max_iter)


def sensitivity_certificate(A: np.ndarray, i: int, p: float, tol: float = 1e-10) -> float:
    """
    Returns the KKT stationarity residual at the minimizer used for sigma_i^p(A).

    Only meaningful for p > 1; the p = 1 minimizer is an exact LP optimum.
    """
    U = orthonormal_basis(A).U
    result = lp_min_constrained(U, U[i], p, tol=tol)
    return kkt_residual(U, U[i], p, result.z)


def _rows_block(U: np.ndarray, rows: range, p: float, tol: float, max_iter: int) -> List[float]:
    return [_row_sensitivity(U, i, p, tol, max_iter) for i in rows]


def lp_sensitivities(
    A: np.ndarray,
    p: float,
    tol: float = 1e-8,
    max_iter: int = 500,
    basis: Optional[OrthonormalBasis] = None,
) -> ScoreVector:
    """
    Computes every row's l_p sensitivity.

    Rows are split into blocks solved concurrently with dask's threaded
    scheduler; results are reassembled in row order.

    Parameters:
    - A (np.ndarray): Input matrix.
    - p (float): Exponent, 1 <= p < inf.
    - tol (float): KKT residual tolerance per row.
    - max_iter (int): Iteration cap per row.
    - basis (OrthonormalBasis, optional): Precomputed basis of A.

    Returns:
    - ScoreVector: Sensitivities of kind lp_sensitivity.
    """
    basis = basis or orthonormal_basis(A)
    if p == 2:
        lev = leverage_scores(A, basis)
        return ScoreVector(values=lev.values, kind="lp_sensitivity", p=2.0, tol=tol, rank=basis.rank)

    n = basis.U.shape[0]
    tasks = [
        delayed(_rows_block)(basis.U, range(start, min(start + ROWS_PER_TASK, n)), p, tol, max_iter)
        for start in range(0, n, ROWS_PER_TASK)
    ]
    blocks = dask.compute(*tasks, scheduler="threads")
    values = np.fromiter((v for block in blocks for v in block), dtype=np.float64, count=n)
    logger.debug("Computed %d l_%g sensitivities, total %.6g.", n, p, values.sum())
    return ScoreVector(values=values, kind="lp_sensitivity", p=float(p), tol=tol, rank=basis.rank)


def total_sensitivity(s: ScoreVector) -> TotalSensitivity:
    """
    Sums sensitivity or leverage scores into the total sensitivity.

    Parameters:
    - s (ScoreVector): Scores of kind lp_sensitivity or leverage.

    Returns:
    - TotalSensitivity: Sum with p, n and rank.
    """
    _require_kind(s, "lp_sensitivity", "leverage")
    return TotalSensitivity(value=s.total, p=s.p, n=len(s), d=s.rank)


# ------------------------------------------
# Lewis weights
# ------------------------------------------
def lewis_weights(
    A: np.ndarray, p: float, tol: float = 1e-8, max_iter: int = 500
) -> ScoreVector:
    """
    Computes l_p Lewis weights by the fixed-point iteration
    w_i <- (a_i^T (A^T W^(1-2/p) A)^-1 a_i)^(p/2), which contracts for 1 <= p < 4.

    Parameters:
    - A (np.ndarray): Full column rank matrix.
    - p (float): Exponent in [1, 4).
    - tol (float): Maximum relative change between iterates at convergence.
    - max_iter (int): Iteration cap.

    Returns:
    - ScoreVector: Weights of kind lewis summing to d.
    """
    if not 1 <= p < 4:
        raise UnsupportedExponent(f"Lewis weights are only computed for 1 <= p < 4, got {p}.")
    A = as_matrix(A)
    basis = orthonormal_basis(A)
    if basis.rank < A.shape[1]:
        raise RankDeficient("Lewis weights need a full column rank matrix.")

    # iterate in the basis: same quadratic forms, better conditioned
    U = basis.U
    w = np.ones(U.shape[0])
    residual = np.inf
    for it in range(1, max_iter + 1):
        G = U.T @ (w[:, np.newaxis] ** (1.0 - 2.0 / p) * U)
        C = scipy.linalg.cho_factor(G)
        quad = np.einsum("ij,ji->i", U, scipy.linalg.cho_solve(C, U.T))
        w_new = np.maximum(quad, 0.0) ** (p / 2.0)
        residual = float(np.max(np.abs(w_new - w) / np.maximum(w_new, np.finfo(float).tiny)))
        w = w_new
        if residual <= tol:
            logger.debug("Lewis iteration converged after %d steps.", it)
            return ScoreVector(values=np.minimum(w, 1.0), kind="lewis", p=float(p), tol=tol, rank=basis.rank)
    raise NoConvergence(
        f"Lewis iteration did not converge within {max_iter} steps (residual {residual:.3g}).",
        best=w,
        residual=residual,
    )


# ------------------------------------------
# Strategy classes
# ------------------------------------------
class Scorer(ABC):
    """
    Abstract base class for row scoring rules.
    """

    @abstractmethod
    def score(self, A: np.ndarray) -> ScoreVector:
        pass


class LeverageScorer(Scorer):
    """Leverage scores (the l_2 sensitivities)."""

    def score(self, A: np.ndarray) -> ScoreVector:
        return leverage_scores(A)


class SensitivityScorer(Scorer):
    """
    Exact l_p sensitivities via constrained IRLS.
    """

    def __init__(self, p: float, tol: float = 1e-8):
        """
        Parameters:
        - p (float): Exponent.
        - tol (float): Solver tolerance.
        """
        self.p = p
        self.tol = tol

    def score(self, A: np.ndarray) -> ScoreVector:
        return lp_sensitivities(A, self.p, self.tol)


class LewisScorer(Scorer):
    """l_p Lewis weights for 1 <= p < 4."""

    def __init__(self, p: float, tol: float = 1e-8):
        self.p = p
        self.tol = tol

    def score(self, A: np.ndarray) -> ScoreVector:
        return lewis_weights(A, self.p, self.tol)


def build_scorer(kind: str, p: float, tol: float = 1e-8) -> Scorer:
    """
    Factory for the row scoring rules.

    Parameters:
    - kind (str): 'leverage', 'sensitivity' or 'lewis'.
    - p (float): Exponent (ignored for leverage).
    - tol (float): Solver tolerance.

    Returns:
    - Scorer: Matching scorer instance.
    """
    if kind == "leverage":
        return LeverageScorer()
    elif kind == "sensitivity":
        return SensitivityScorer(p, tol)
    elif kind == "lewis":
        return LewisScorer(p, tol)
    else:
        raise ValueError(f"Score kind {kind!r} not supported! Choose 'leverage', 'sensitivity' or 'lewis'.")
