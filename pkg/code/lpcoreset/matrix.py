import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import pandas as pd
import scipy.linalg

from lpcoreset.exceptions import AllZeroMatrix, ExponentOutOfRange, MatrixFormatError
from lpcoreset.rng import make_rng

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]


def as_matrix(A: ArrayLike, allow_empty: bool = False) -> np.ndarray:
    """
    Validates and converts input to a dense float64 n x d matrix.

    Parameters:
    - A (array-like): Candidate matrix.
    - allow_empty (bool): Accept zero rows (sampled matrices may be empty).

    Returns:
    - np.ndarray: Two-dimensional float64 array.
    """
    M = np.asarray(A, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, np.newaxis]
    if M.ndim != 2:
        raise MatrixFormatError(f"Expected a 2-D matrix, got {M.ndim} dimensions.")
    if M.shape[1] < 1 or (M.shape[0] < 1 and not allow_empty):
        raise MatrixFormatError(f"Matrix must have at least one row and column, got {M.shape}.")
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError("Matrix contains NaN or infinite entries.")
    return M


def _require_nonzero(A: np.ndarray) -> None:
    if not np.any(A):
        raise AllZeroMatrix("Every entry of the matrix is zero.")


# ------------------------------------------
# Orthonormal basis
# ------------------------------------------
@dataclass(frozen=True)
class OrthonormalBasis:
    """
    Orthonormal basis U (n x r) for the column span of a source matrix.

    Attributes:
    - U (np.ndarray): Basis with orthonormal columns.
    - rank (int): Numerical rank r.
    - source_cols (int): Number of columns of the source matrix.
    """

    U: np.ndarray
    rank: int
    source_cols: int


def orthonormal_basis(A: ArrayLike, rank_tol: float = DEFAULT_RANK_TOL) -> OrthonormalBasis:
    """
    Computes an orthonormal basis for col(A) by Householder QR with column pivoting.

    The numerical rank counts pivots |R_kk| >= rank_tol * |R_00|. Basis columns
    are returned in the order of their pivot columns in A and signed so that
    the largest-magnitude entry of every column is positive.

    Parameters:
    - A (array-like): Input matrix.
    - rank_tol (float): Relative pivot threshold.

    Returns:
    - OrthonormalBasis: Basis, rank and source width.
    """
    A = as_matrix(A)
    _require_nonzero(A)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive.")

    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    pivots = np.abs(np.diag(R))
    rank = int(np.count_nonzero(pivots >= rank_tol * pivots[0]))

    order = np.argsort(piv[:rank], kind="stable")
    U = Q[:, :rank][:, order]
    lead = U[np.argmax(np.abs(U), axis=0), np.arange(rank)]
    U = U * np.where(lead < 0, -1.0, 1.0)

    if rank < A.shape[1]:
        logger.debug("Numerical rank %d below column count %d.", rank, A.shape[1])
    return OrthonormalBasis(U=U, rank=rank, source_cols=A.shape[1])


def coefficient_map(A: np.ndarray, U: np.ndarray) -> np.ndarray:
    """
    Returns X (d x r) with A @ X = U, mapping basis coordinates z to inputs x = X z.
    """
    X, *_ = scipy.linalg.lstsq(A, U)
    return X


def gram_pinv(A: ArrayLike, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """
    Computes the pseudo-inverse of the Gram matrix A^T A.

    Uses the thin SVD A = W S V^T so that (A^T A)^+ = V S^-2 V^T over the
    singular values above rank_tol times the largest.

    Parameters:
    - A (array-like): Input matrix.
    - rank_tol (float): Relative singular value cutoff.

    Returns:
    - np.ndarray: d x d symmetric pseudo-inverse.
    """
    A = as_matrix(A)
    _require_nonzero(A)
    _, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s >= rank_tol * s[0]
    V = Vt[keep].T
    return (V / s[keep] ** 2) @ V.T


def lp_norm(v: Sequence[float], p: float) -> float:
    """
    Computes (sum |v_i|^p)^(1/p), rescaled by max |v_i| to avoid overflow.

    Parameters:
    - v (sequence of float): Input vector; an empty vector has norm 0.
    - p (float): Exponent, p >= 1.

    Returns:
    - float: The l_p norm.
    """
    if not (p >= 1 and np.isfinite(p)):
        raise ExponentOutOfRange(f"lp_norm requires finite p >= 1, got {p}.")
    a = np.abs(np.asarray(v, dtype=np.float64)).ravel()
    if a.size == 0:
        return 0.0
    top = a.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def spectral_norm(M: ArrayLike, tol: float = 1e-6, max_iter: int = 1000, seed: int = 0) -> float:
    """
    Estimates ||M||_2 by power iteration on M^T M.

    Parameters:
    - M (array-like): Input matrix.
    - tol (float): Relative change in the estimate at which iteration stops.
    - max_iter (int): Iteration cap.
    - seed (int): Seed of the random start vector.

    Returns:
    - float: Largest singular value estimate (a lower bound up to rounding).
    """
    M = as_matrix(M)
    v = make_rng(seed).standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = M.T @ (M @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0:
            return 0.0
        v = w / norm_w
        previous, estimate = estimate, np.sqrt(norm_w)
        if abs(estimate - previous) <= tol * estimate:
            break
    return float(np.linalg.norm(M @ v))


# ------------------------------------------
# Matrix CSV
# ------------------------------------------
def read_matrix_csv(path: str) -> np.ndarray:
    """
    Reads a headerless comma-separated matrix, rejecting ragged rows.

    Parameters:
    - path (str): Path of the CSV file.

    Returns:
    - np.ndarray: Parsed matrix.
    """
    try:
        frame = pd.read_csv(path, header=None, dtype=np.float64, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise MatrixFormatError(f"Cannot parse matrix CSV {path}: {e}") from e
    if frame.isna().to_numpy().any():
        raise MatrixFormatError(f"Ragged or missing values in matrix CSV {path}.")
    return as_matrix(frame.to_numpy())


def write_matrix_csv(A: np.ndarray, path: str) -> None:
    """
    Writes a matrix as headerless CSV with round-trip precision and '\\n' endings.

    Parameters:
    - A (np.ndarray): Matrix to save (may have zero rows).
    - path (str): Destination file.
    """
    frame = pd.DataFrame(np.asarray(A, dtype=np.float64))
    frame.to_csv(
        path, header=False, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8"
    )
