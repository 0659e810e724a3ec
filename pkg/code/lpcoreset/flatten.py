import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from lpcoreset.exceptions import ExponentOutOfRange, InvalidScoreKind, ShapeMismatch
from lpcoreset.matrix import as_matrix
from lpcoreset.scores import ScoreVector, leverage_scores, lp_sensitivities

logger = logging.getLogger(__name__)


# ------------------------------------------
# Row provenance
# ------------------------------------------
@dataclass
class RowMap:
    """
    Provenance of the rows of a flattened matrix.

    Output row j is a copy of source row `source[j]`, split into `copies[j]`
    contiguous copies each scaled by copies[j]^(-1/p).

    Attributes:
    - source (np.ndarray): Source row index per output row.
    - copies (np.ndarray): Number of copies of that source row.
    - p (float): Exponent of the split.
    """

    source: np.ndarray
    copies: np.ndarray
    p: float

    @property
    def scale(self) -> np.ndarray:
        return self.copies.astype(np.float64) ** (-1.0 / self.p)

    @property
    def n_source(self) -> int:
        return int(np.unique(self.source).size)

    def to_records(self) -> List[Dict[str, int]]:
        """
        Returns [{"src": i, "k": k}, ...] in source order.
        """
        first = np.flatnonzero(np.r_[True, np.diff(self.source) != 0])
        return [{"src": int(self.source[j]), "k": int(self.copies[j])} for j in first]

    @classmethod
    def from_records(cls, records: List[Dict[str, int]], p: float) -> "RowMap":
        k = np.array([r["k"] for r in records], dtype=np.int64)
        src = np.array([r["src"] for r in records], dtype=np.int64)
        return cls(source=np.repeat(src, k), copies=np.repeat(k, k), p=p)

    def reconstruct(self, flattened: np.ndarray) -> np.ndarray:
        """
        Recovers the source matrix by taking one copy per source and undoing its scale.
        """
        if flattened.shape[0] != self.source.shape[0]:
            raise ShapeMismatch("Flattened matrix does not match the row map.")
        first = np.flatnonzero(np.r_[True, np.diff(self.source) != 0])
        return flattened[first] * (self.copies[first].astype(np.float64) ** (1.0 / self.p))[:, np.newaxis]


def split_rows(A: np.ndarray, k: np.ndarray, p: float) -> Tuple[np.ndarray, RowMap]:
    """
    Replaces row i by k_i contiguous copies of a_i / k_i^(1/p).

    Parameters:
    - A (np.ndarray): n x d matrix.
    - k (np.ndarray): Copies per row (>= 1).
    - p (float): Exponent whose norm is preserved.

    Returns:
    - (np.ndarray, RowMap): Split matrix and provenance.
    """
    k = np.asarray(k, dtype=np.int64)
    scaled = A * (k.astype(np.float64) ** (-1.0 / p))[:, np.newaxis]
    out = np.repeat(scaled, k, axis=0)
    rowmap = RowMap(source=np.repeat(np.arange(A.shape[0]), k), copies=np.repeat(k, k), p=float(p))
    if out.shape[0] > A.shape[0]:
        logger.debug("Split %d rows into %d.", A.shape[0], out.shape[0])
    return out, rowmap


def _copies_over_threshold(scores: np.ndarray, threshold: float) -> np.ndarray:
    k = np.ones(scores.shape[0], dtype=np.int64)
    over = scores > threshold
    k[over] = np.ceil(scores[over] / threshold).astype(np.int64)
    return k


# ------------------------------------------
# The three transforms
# ------------------------------------------
def flatten_sensitivities(
    A: np.ndarray, p: float, C: float, s: ScoreVector
) -> Tuple[np.ndarray, RowMap]:
    """
    Splits every row with sigma_i > C * S / n into ceil(sigma_i / (C S / n)) copies.

    The output has at most (1 + 1/C) n rows, identical l_p norms ||A'x||_p and
    every row sensitivity at most C S / n.

    Parameters:
    - A (np.ndarray): n x d matrix.
    - p (float): Exponent.
    - C (float): Threshold factor, C >= 1.
    - s (ScoreVector): Fresh lp_sensitivities(A, p).

    Returns:
    - (np.ndarray, RowMap): Flattened matrix and provenance.
    """
    A = as_matrix(A)
    if s.kind != "lp_sensitivity":
        raise InvalidScoreKind(f"flatten_sensitivities needs lp_sensitivity scores, got {s.kind!r}.")
    if len(s) != A.shape[0]:
        raise ShapeMismatch(f"{len(s)} scores for {A.shape[0]} rows.")
    if C < 1:
        raise ValueError(f"C must be at least 1, got {C}.")
    threshold = C * s.total / A.shape[0]
    return split_rows(A, _copies_over_threshold(s.values, threshold), p)


def flatten_uniform(A: np.ndarray, p: float, alpha: float) -> Tuple[np.ndarray, RowMap]:
    """
    Replaces every row by k = ceil(1/alpha) copies of a_i / k^(1/p).

    All l_q sensitivities of the output are at most 1/k <= alpha and
    ||A'x||_q = k^(1/q - 1/p) ||Ax||_q for every q.

    Parameters:
    - A (np.ndarray): n x d matrix.
    - p (float): Exponent whose norm is preserved.
    - alpha (float): Target score bound in (0, 1].

    Returns:
    - (np.ndarray, RowMap): Flattened matrix and provenance.
    """
    A = as_matrix(A)
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}.")
    k = int(np.ceil(1.0 / alpha))
    return split_rows(A, np.full(A.shape[0], k), p)


def flatten_sens_lev(
    A: np.ndarray, p: float, C: float, lev: ScoreVector
) -> Tuple[np.ndarray, RowMap]:
    """
    Splits every row with tau_i > C d / n into ceil(tau_i / (C d / n)) copies of a_i / k_i^(1/p).

    For p > 2 this keeps ||A'x||_p, cannot decrease ||A'x||_2 and bounds the
    output leverage by (C d / n)^(2/p) * tau_i^(1 - 2/p).

    Parameters:
    - A (np.ndarray): n x d matrix.
    - p (float): Exponent, p > 2.
    - C (float): Threshold factor, C >= 1.
    - lev (ScoreVector): Fresh leverage_scores(A).

    Returns:
    - (np.ndarray, RowMap): Flattened matrix and provenance.
    """
    if p <= 2:
        raise ExponentOutOfRange(f"flatten_sens_lev needs p > 2, got {p}.")
    A = as_matrix(A)
    if lev.kind != "leverage":
        raise InvalidScoreKind(f"flatten_sens_lev needs leverage scores, got {lev.kind!r}.")
    if len(lev) != A.shape[0]:
        raise ShapeMismatch(f"{len(lev)} scores for {A.shape[0]} rows.")
    if C < 1:
        raise ValueError(f"C must be at least 1, got {C}.")
    threshold = C * lev.rank / A.shape[0]
    return split_rows(A, _copies_over_threshold(lev.values, threshold), p)


# ------------------------------------------
# Strategy classes (always score from scratch)
# ------------------------------------------
class Flattener(ABC):
    """
    Abstract base class for norm-preserving row splitting transforms.
    """

    def __init__(self, p: float):
        self.p = p

    @abstractmethod
    def apply(self, A: np.ndarray) -> Tuple[np.ndarray, RowMap]:
        pass


class SensitivityFlattener(Flattener):
    """Splits rows with large l_p sensitivity."""

    def __init__(self, p: float, C: float = 4.0, tol: float = 1e-8):
        super().__init__(p)
        self.C = C
        self.tol = tol

    def apply(self, A: np.ndarray) -> Tuple[np.ndarray, RowMap]:
        return flatten_sensitivities(A, self.p, self.C, lp_sensitivities(A, self.p, self.tol))


class UniformFlattener(Flattener):
    """Splits every row into ceil(1/alpha) copies."""

    def __init__(self, p: float, alpha: float):
        super().__init__(p)
        self.alpha = alpha

    def apply(self, A: np.ndarray) -> Tuple[np.ndarray, RowMap]:
        return flatten_uniform(A, self.p, self.alpha)


class SensLevFlattener(Flattener):
    """Splits rows with large leverage score (p > 2)."""

    def __init__(self, p: float, C: float = 4.0):
        super().__init__(p)
        self.C = C

    def apply(self, A: np.ndarray) -> Tuple[np.ndarray, RowMap]:
        return flatten_sens_lev(A, self.p, self.C, leverage_scores(A))


def build_flattener(kind: str, p: float, C: float = 4.0, alpha: float = 0.5) -> Flattener:
    """
    Returns the flattener for 'sensitivity', 'uniform' or 'senslev'.
    """
    if kind == "sensitivity":
        return SensitivityFlattener(p, C)
    elif kind == "uniform":
        return UniformFlattener(p, alpha)
    elif kind == "senslev":
        return SensLevFlattener(p, C)
    else:
        raise ValueError(f"Flattening {kind!r} not supported! Choose 'sensitivity', 'uniform' or 'senslev'.")
