import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from lpcoreset.exceptions import ExponentOutOfRange, InvalidScoreKind, ShapeMismatch
from lpcoreset.matrix import as_matrix
from lpcoreset.rng import make_rng
from lpcoreset.scores import ScoreVector

logger = logging.getLogger(__name__)

PLAN_METHODS = ("sensitivity", "root_leverage", "lewis", "uniform_half", "uniform", "custom")


# ------------------------------------------
# Plans and draws
# ------------------------------------------
@dataclass
class SamplingPlan:
    """
    Per-row inclusion probabilities of an l_p sampling matrix.

    Attributes:
    - q (np.ndarray): Probabilities in [0, 1]; rows with q_i = 0 are never kept.
    - p (float): Exponent fixing the weights q_i^(-1/p).
    - method (str): Provenance of the probabilities.
    - alpha (float, optional): Oversampling parameter, when one was used.
    """

    q: np.ndarray
    p: float
    method: str = "custom"
    alpha: Optional[float] = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        if self.q.ndim != 1 or self.q.size < 1:
            raise ValueError("A sampling plan needs a non-empty probability vector.")
        if np.any(~np.isfinite(self.q)) or np.any(self.q < 0) or np.any(self.q > 1):
            raise ValueError("Sampling probabilities must lie in [0, 1].")
        if self.method not in PLAN_METHODS:
            raise ValueError(f"Unknown plan method {self.method!r}.")
        if not self.p >= 1:
            raise ExponentOutOfRange(f"Sampling matrices need p >= 1, got {self.p}.")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def expected_rows(self) -> float:
        return float(np.sum(self.q))

    def to_dict(self) -> Dict[str, object]:
        return {
            "method": self.method,
            "p": float(self.p),
            "alpha": None if self.alpha is None else float(self.alpha),
            "expected_rows": self.expected_rows,
            "q": [float(v) for v in self.q],
        }


@dataclass
class SampleDraw:
    """
    Realized diagonal sampling matrix: kept rows and their weights q_i^(-1/p).

    Attributes:
    - indices (np.ndarray): Kept row indices, strictly increasing.
    - weights (np.ndarray): Weight of each kept row.
    - seed (int): Seed the draw came from.
    - p (float): Exponent.
    - n (int): Number of rows of the sampled matrix.
    - plan (SamplingPlan, optional): Plan the draw realizes.
    """

    indices: np.ndarray
    weights: np.ndarray
    seed: int
    p: float
    n: int
    plan: Optional[SamplingPlan] = None

    @property
    def kept(self) -> List[Tuple[int, float]]:
        return [(int(i), float(w)) for i, w in zip(self.indices, self.weights)]

    @property
    def rows_kept(self) -> int:
        return int(self.indices.shape[0])

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": int(self.seed),
            "p": float(self.p),
            "n": int(self.n),
            "kept": [[i, w] for i, w in self.kept],
        }

    @classmethod
    def from_dict(cls, record: Dict[str, object]) -> "SampleDraw":
        kept = record["kept"]
        indices = np.array([int(i) for i, _ in kept], dtype=np.int64)
        weights = np.array([float(w) for _, w in kept], dtype=np.float64)
        if np.any(np.diff(indices) <= 0) or np.any(weights <= 0):
            raise ValueError("Draw records need strictly increasing indices and positive weights.")
        n = int(record["n"]) if "n" in record else int(indices[-1]) + 1 if indices.size else 0
        return cls(indices=indices, weights=weights, seed=int(record["seed"]), p=float(record["p"]), n=n)


def _floor_vanished(q: np.ndarray, scores: np.ndarray, n: int) -> np.ndarray:
    # nonzero score that underflowed to a zero probability
    vanished = (q <= 0) & (scores > 0)
    if np.any(vanished):
        logger.warning("Raising %d vanishing probabilities to the floor 1/n^2.", int(vanished.sum()))
        q = q.copy()
        q[vanished] = 1.0 / n**2
    return q


# ------------------------------------------
# Plan builders
# ------------------------------------------
def sensitivity_plan(s: ScoreVector, alpha: float) -> SamplingPlan:
    """
    Sensitivity sampling: q_i = min{1, 1/n + sigma_i / alpha}.

    Parameters:
    - s (ScoreVector): l_p sensitivities.
    - alpha (float): Oversampling parameter, alpha > 0.

    Returns:
    - SamplingPlan: Plan with method 'sensitivity'.
    """
    if s.kind != "lp_sensitivity":
        raise InvalidScoreKind(f"sensitivity_plan needs lp_sensitivity scores, got {s.kind!r}.")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}.")
    n = len(s)
    q = np.minimum(1.0, 1.0 / n + s.values / alpha)
    return SamplingPlan(q=q, p=s.p, method="sensitivity", alpha=float(alpha))


def root_leverage_plan(lev: ScoreVector, p: float, alpha: float) -> SamplingPlan:
    """
    Root leverage score sampling for 1 <= p < 2: q_i = min{1, tau_i^(p/2) / alpha}.

    Zero-leverage rows keep q_i = 0 and are never sampled.
    """
    if lev.kind != "leverage":
        raise InvalidScoreKind(f"root_leverage_plan needs leverage scores, got {lev.kind!r}.")
    if not 1 <= p < 2:
        raise ExponentOutOfRange(f"Root leverage sampling needs 1 <= p < 2, got {p}.")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}.")
    q = np.minimum(1.0, lev.values ** (p / 2.0) / alpha)
    q = _floor_vanished(q, lev.values, len(lev))
    return SamplingPlan(q=q, p=float(p), method="root_leverage", alpha=float(alpha))


def lewis_plan(w: ScoreVector, m_target: float) -> SamplingPlan:
    """
    Lewis weight sampling: q_i = min{1, m_target * w_i / sum(w)}, floored at 1/n^2.
    """
    if w.kind != "lewis":
        raise InvalidScoreKind(f"lewis_plan needs Lewis weights, got {w.kind!r}.")
    if m_target < 0:
        raise ValueError(f"m_target must be nonnegative, got {m_target}.")
    n = len(w)
    q = np.minimum(1.0, m_target * w.values / w.total)
    q = np.where(w.values > 0, np.maximum(q, 1.0 / n**2), 0.0)
    return SamplingPlan(q=q, p=w.p, method="lewis")


def half_plan(n: int, p: float = 2.0) -> SamplingPlan:
    """All q_i = 1/2; kept rows get weight 2^(1/p)."""
    return SamplingPlan(q=np.full(n, 0.5), p=float(p), method="uniform_half")


def uniform_plan(n: int, m_target: float, p: float = 2.0) -> SamplingPlan:
    """Uniform baseline: q_i = min{1, m_target / n}."""
    if m_target <= 0:
        raise ValueError(f"m_target must be positive, got {m_target}.")
    return SamplingPlan(q=np.full(n, min(1.0, m_target / n)), p=float(p), method="uniform")


# ------------------------------------------
# Drawing and applying
# ------------------------------------------
def draw(plan: SamplingPlan, seed: int) -> SampleDraw:
    """
    Realizes independent Bernoulli(q_i) row choices from the seeded stream.

    Row i is kept iff u_i < q_i, where u_i is the i-th uniform of make_rng(seed).

    Parameters:
    - plan (SamplingPlan): Probabilities.
    - seed (int): Stream seed.

    Returns:
    - SampleDraw: Kept rows with weights q_i^(-1/p).
    """
    u = make_rng(seed).random(plan.n)
    indices = np.flatnonzero(u < plan.q)
    weights = plan.q[indices] ** (-1.0 / plan.p)
    return SampleDraw(indices=indices, weights=weights, seed=int(seed), p=plan.p, n=plan.n, plan=plan)


def apply(dr: SampleDraw, A: np.ndarray) -> np.ndarray:
    """
    Returns SA: the kept rows of A scaled by their weights (possibly 0 x d).
    """
    A = as_matrix(A)
    if A.shape[0] != dr.n:
        raise ShapeMismatch(f"Draw over {dr.n} rows applied to a matrix with {A.shape[0]} rows.")
    return dr.weights[:, np.newaxis] * A[dr.indices]


# ------------------------------------------
# Sizing helpers for the recursive drivers
# ------------------------------------------
def recurrence_bound(a0: float, lam: float, b: float, i: int) -> float:
    """
    Closed form of a_{i+1} = lam a_i + b: a_i = (b - lam^i (b - (1-lam) a_0)) / (1 - lam).
    """
    if not 0 < lam < 1:
        raise ValueError(f"lam must lie in (0, 1), got {lam}.")
    return (b - lam**i * (b - (1.0 - lam) * a0)) / (1.0 - lam)
