import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from lpcoreset.calibrate import calibrate_alpha
from lpcoreset.exceptions import BudgetExhausted, ExponentOutOfRange, RoundRetryExhausted
from lpcoreset.flatten import RowMap, flatten_sens_lev, flatten_sensitivities
from lpcoreset.matrix import as_matrix
from lpcoreset.sampling import SampleDraw, apply, draw, half_plan, recurrence_bound, root_leverage_plan
from lpcoreset.scores import ScoreVector, leverage_scores, lp_sensitivities
from lpcoreset.verify import DistortionReport, distortion_between

logger = logging.getLogger(__name__)

FLATTEN_C = 4.0
MAX_RETRIES = 10
ROW_SHRINK = 0.9375
# double flattening grows rows by at most (5/4)^2
FLATTEN_GROWTH = 25.0 / 16.0
LEVERAGE_SLACK = 8.0
LEVERAGE_TOL = 1e-9


# ------------------------------------------
# Trace records
# ------------------------------------------
@dataclass
class RoundRecord:
    """
    One accepted round of a recursive sampler.

    Attributes:
    - round (int): Round index, from 0.
    - rows_in (int): Rows entering the round.
    - rows_out (int): Rows kept by the accepted draw.
    - lambda_est (float): Estimated distortion of the round's draw.
    - total_sens_est (float): Total sensitivity (or score mass) of the round's input.
    - alpha (float, optional): Oversampling parameter; None for half sampling.
    - seed (int): Seed of the accepted draw.
    - attempts (int): Draws tried, including the accepted one.
    - flatten_ok (bool, optional): Whether the flatten postconditions held.
    - rows_bound (float, optional): Row count the log-row recurrence allows after the round.
    """

    round: int
    rows_in: int
    rows_out: int
    lambda_est: float
    total_sens_est: float
    alpha: Optional[float]
    seed: int
    attempts: int = 1
    flatten_ok: Optional[bool] = None
    rows_bound: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        record = {
            "round": self.round,
            "rows_in": self.rows_in,
            "rows_out": self.rows_out,
            "lambda_est": float(self.lambda_est),
            "total_sens_est": float(self.total_sens_est),
            "alpha": None if self.alpha is None else float(self.alpha),
            "seed": self.seed,
            "attempts": self.attempts,
        }
        if self.flatten_ok is not None:
            record["flatten_ok"] = bool(self.flatten_ok)
        if self.rows_bound is not None:
            record["rows_bound"] = float(self.rows_bound)
        return record


@dataclass
class RecursiveResult:
    """
    Output of a recursive sampler; unpacks as (matrix, trace).

    Row j of `matrix` equals weights[j] * A[source[j]] for the original input A.
    """

    matrix: np.ndarray
    trace: List[RoundRecord]
    source: np.ndarray
    weights: np.ndarray
    p: float
    report: Optional[DistortionReport] = None
    total_sensitivity: Optional[float] = None
    stop_rows: float = field(default=0.0)

    def __iter__(self) -> Iterator[object]:
        yield self.matrix
        yield self.trace

    @property
    def rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def cumulative_bound(self) -> float:
        """Composed per-round distortion prod(1 + lambda_i) - 1."""
        return float(np.prod([1.0 + r.lambda_est for r in self.trace]) - 1.0)

    def to_dict(self) -> Dict[str, object]:
        return {
            "p": float(self.p),
            "rows": self.rows,
            "stop_rows": float(self.stop_rows),
            "cumulative_bound": self.cumulative_bound,
            "lambda_est": None if self.report is None else float(self.report.lambda_est),
            "total_sensitivity": None if self.total_sensitivity is None else float(self.total_sensitivity),
            "trace": [r.to_dict() for r in self.trace],
            "kept": [[int(i), float(w)] for i, w in zip(self.source, self.weights)],
        }


class _Provenance:
    # rows of the running matrix as weight * A[source]
    def __init__(self, n: int):
        self.source = np.arange(n)
        self.weights = np.ones(n)

    def flattened(self, rowmap: RowMap) -> None:
        self.weights = self.weights[rowmap.source] * rowmap.scale
        self.source = self.source[rowmap.source]

    def sampled(self, dr: SampleDraw) -> None:
        self.weights = self.weights[dr.indices] * dr.weights
        self.source = self.source[dr.indices]


# ------------------------------------------
# Stop rules
# ------------------------------------------
def log2_rounds(n: int) -> int:
    """ceil(log2 n), at least 1."""
    return max(1, math.ceil(math.log2(max(n, 2))))


def sensitivity_target(total: float, p: float, n: int, eps: float) -> float:
    """
    Stop size ceil(S^(2 - 2/p) * (ceil(log2 n) / eps)^2) of recursive sensitivity sampling.
    """
    return float(math.ceil(total ** (2.0 - 2.0 / p) * (log2_rounds(n) / eps) ** 2))


def sens_lev_target(d: int, total: float, p: float, n: int, eps: float) -> float:
    """d^(2/p) S^(2 - 4/p) eps^-2 (log2 n)^3."""
    return d ** (2.0 / p) * total ** (2.0 - 4.0 / p) * eps**-2 * math.log2(max(n, 2)) ** 3


def root_leverage_divisor(n: int) -> int:
    """max(2, ceil(log2 log2 n)): per-round budget divisor and round limit."""
    if n < 4:
        return 2
    return max(2, math.ceil(math.log2(math.log2(n))))


def root_leverage_cap(d: int, p: float, n: int, eps: float) -> float:
    """d eps^(-4/p) (log2 n)^3."""
    return d * eps ** (-4.0 / p) * math.log2(max(n, 2)) ** 3


def root_leverage_rows_bound(n: int, p: float, cap: float, i: int) -> float:
    """
    Row bound after i root leverage rounds.

    A round maps m rows to about m^(1 - p/2) d^(p/2) eps^-2 polylog rows, so
    a_i = log2 m_i follows a_{i+1} = (1 - p/2) a_i + b with a_0 = log2 n and
    b = (p/2) log2 cap, whose fixed point is log2 cap.
    """
    lam = 1.0 - p / 2.0
    b = (p / 2.0) * math.log2(cap)
    return 2.0 ** recurrence_bound(math.log2(max(n, 2)), lam, b, i)


def root_leverage_round_limit(n: int, p: float, cap: float) -> int:
    """
    First i with root_leverage_rows_bound within a factor 2^(2/p) of cap, at
    least 1 while n > cap and at most root_leverage_divisor(n).
    """
    limit = root_leverage_divisor(n)
    if n <= cap:
        return 0
    for i in range(1, limit + 1):
        if root_leverage_rows_bound(n, p, cap, i) <= cap * 2.0 ** (2.0 / p):
            return i
    return limit


def sens_lev_leverage_bound(d: int, total: float, p: float, n: int) -> float:
    """Largest leverage allowed after double flattening an n-row input."""
    return (4.0 * d / n) ** (2.0 / p) * (LEVERAGE_SLACK * total / n) ** (1.0 - 2.0 / p) + LEVERAGE_TOL


def double_flatten(B: np.ndarray, p: float, s: ScoreVector) -> Tuple[np.ndarray, RowMap, RowMap, bool, bool]:
    """
    Flattens by sensitivities and then by leverage scores, both with C = 4.

    Parameters:
    - B (np.ndarray): Current matrix.
    - p (float): Exponent, p > 2.
    - s (ScoreVector): Fresh lp_sensitivities(B, p).

    Returns:
    - (np.ndarray, RowMap, RowMap, bool, bool): Flattened matrix, both row maps, and whether
      the row growth stayed within 25/16 and the leverage within `sens_lev_leverage_bound`.
    """
    rows_in = B.shape[0]
    F1, map1 = flatten_sensitivities(B, p, FLATTEN_C, s)
    F2, map2 = flatten_sens_lev(F1, p, FLATTEN_C, leverage_scores(F1))
    growth_ok = F2.shape[0] * 16 <= 25 * rows_in
    leverage_ok = leverage_scores(F2).values.max() <= sens_lev_leverage_bound(s.rank, s.total, p, rows_in)
    return F2, map1, map2, bool(growth_ok), bool(leverage_ok)


def _round_seed(seed: int, round_index: int, attempt: int) -> int:
    return seed + round_index * 10 + attempt


# ------------------------------------------
# Drivers
# ------------------------------------------
def _half_sample_round(
    F: np.ndarray,
    rows_in: int,
    p: float,
    budget: float,
    seed: int,
    round_index: int,
    probes: int,
    restarts: int,
    trace: List[RoundRecord],
) -> Tuple[SampleDraw, DistortionReport, int]:
    for attempt in range(MAX_RETRIES):
        round_seed = _round_seed(seed, round_index, attempt)
        dr = draw(half_plan(F.shape[0], p), round_seed)
        if dr.rows_kept > ROW_SHRINK * rows_in or dr.rows_kept == 0:
            logger.warning("Round %d seed %d kept %d of %d rows; retrying.", round_index, round_seed, dr.rows_kept, rows_in)
            continue
        report = distortion_between(F, apply(dr, F), p, probes, restarts, round_seed)
        if report.lambda_est <= budget:
            return dr, report, attempt + 1
        logger.warning(
            "Round %d seed %d distortion %.4g above budget %.4g; retrying.", round_index, round_seed, report.lambda_est, budget
        )
    raise RoundRetryExhausted(
        f"Round {round_index} found no acceptable draw in {MAX_RETRIES} attempts.", round_index=round_index, trace=trace
    )


def _finish(
    A: np.ndarray,
    B: np.ndarray,
    prov: _Provenance,
    trace: List[RoundRecord],
    p: float,
    stop_rows: float,
    probes: int,
    restarts: int,
    seed: int,
    tol: float,
) -> RecursiveResult:
    report = distortion_between(A, B, p, probes, restarts, seed)
    total = lp_sensitivities(B, p, tol).total
    logger.info(
        "Recursive sampling kept %d of %d rows in %d rounds (distortion %.4g).",
        B.shape[0],
        A.shape[0],
        len(trace),
        report.lambda_est,
    )
    return RecursiveResult(
        matrix=B,
        trace=trace,
        source=prov.source,
        weights=prov.weights,
        p=float(p),
        report=report,
        total_sensitivity=total,
        stop_rows=stop_rows,
    )


def recursive_sensitivity(
    A: np.ndarray,
    p: float,
    eps: float,
    delta: float = 0.1,
    seed: int = 0,
    target: Optional[float] = None,
    probes: int = 64,
    restarts: int = 2,
    tol: float = 1e-8,
) -> RecursiveResult:
    """
    Recursive sensitivity sampling for p > 2.

    Each round flattens the current matrix with C = 4 and keeps every row with
    probability 1/2. A round is accepted when it keeps at most 15/16 of the
    rows entering it and its estimated distortion is at most eps / ceil(log2 n);
    up to 10 seeds are tried per round. Rounds stop once the row count reaches
    `target` (default `sensitivity_target`) or after ceil(log2 n) rounds.

    Parameters:
    - A (np.ndarray): Input matrix.
    - p (float): Exponent, p > 2.
    - eps (float): Overall distortion budget.
    - delta (float): Failure probability; only recorded, retries handle failures.
    - seed (int): Base seed; round r attempt a uses seed + 10 r + a.
    - target (float, optional): Row count at which to stop.
    - probes (int): Distortion probes per round.
    - restarts (int): Distortion ascent restarts per round.
    - tol (float): Sensitivity solver tolerance.

    Returns:
    - RecursiveResult: Final matrix, trace and composed provenance.
    """
    if p <= 2:
        raise ExponentOutOfRange(f"Recursive sensitivity sampling needs p > 2, got {p}.")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}.")
    A = as_matrix(A)
    n = A.shape[0]
    rounds = log2_rounds(n)
    budget = eps / rounds
    B = A
    prov = _Provenance(n)
    trace: List[RoundRecord] = []
    stop_rows = target

    for r in range(rounds):
        s = lp_sensitivities(B, p, tol)
        if stop_rows is None:
            stop_rows = sensitivity_target(s.total, p, n, eps)
            logger.info("Recursive sensitivity sampling stops at %.0f rows (delta=%g).", stop_rows, delta)
        if B.shape[0] <= stop_rows:
            break
        F, rowmap = flatten_sensitivities(B, p, FLATTEN_C, s)
        dr, report, attempts = _half_sample_round(F, B.shape[0], p, budget, seed, r, probes, restarts, trace)
        trace.append(
            RoundRecord(
                round=r,
                rows_in=B.shape[0],
                rows_out=dr.rows_kept,
                lambda_est=report.lambda_est,
                total_sens_est=s.total,
                alpha=None,
                seed=dr.seed,
                attempts=attempts,
            )
        )
        prov.flattened(rowmap)
        prov.sampled(dr)
        B = apply(dr, F)

    return _finish(A, B, prov, trace, p, stop_rows or 0.0, probes, restarts, seed, tol)


def recursive_sens_lev(
    A: np.ndarray,
    p: float,
    eps: float,
    delta: float = 0.1,
    seed: int = 0,
    target: Optional[float] = None,
    probes: int = 64,
    restarts: int = 2,
    tol: float = 1e-8,
) -> RecursiveResult:
    """
    Recursive leverage score plus sensitivity sampling for p > 2.

    As `recursive_sensitivity`, but each round flattens by sensitivities and
    then by leverage scores (both with C = 4) before half sampling. Every round
    records whether the double flatten kept at most 25/16 of the rows and
    bounded the leverage scores by `sens_lev_leverage_bound`. The default stop
    size is `sens_lev_target`.
    """
    if p <= 2:
        raise ExponentOutOfRange(f"Recursive sens-lev sampling needs p > 2, got {p}.")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}.")
    A = as_matrix(A)
    n = A.shape[0]
    rounds = log2_rounds(n)
    budget = eps / rounds
    B = A
    prov = _Provenance(n)
    trace: List[RoundRecord] = []
    stop_rows = target

    for r in range(rounds):
        s = lp_sensitivities(B, p, tol)
        if stop_rows is None:
            stop_rows = sens_lev_target(s.rank, s.total, p, n, eps)
            logger.info("Recursive sens-lev sampling stops at %.0f rows (delta=%g).", stop_rows, delta)
        if B.shape[0] <= stop_rows:
            break
        rows_in = B.shape[0]
        F2, map1, map2, growth_ok, leverage_ok = double_flatten(B, p, s)
        if not (growth_ok and leverage_ok):
            logger.warning("Round %d flatten postconditions failed (growth %s, leverage %s).", r, growth_ok, leverage_ok)

        dr, report, attempts = _half_sample_round(F2, rows_in, p, budget, seed, r, probes, restarts, trace)
        trace.append(
            RoundRecord(
                round=r,
                rows_in=rows_in,
                rows_out=dr.rows_kept,
                lambda_est=report.lambda_est,
                total_sens_est=s.total,
                alpha=None,
                seed=dr.seed,
                attempts=attempts,
                flatten_ok=bool(growth_ok and leverage_ok),
            )
        )
        prov.flattened(map1)
        prov.flattened(map2)
        prov.sampled(dr)
        B = apply(dr, F2)

    return _finish(A, B, prov, trace, p, stop_rows or 0.0, probes, restarts, seed, tol)


def recursive_root_leverage(
    A: np.ndarray,
    p: float,
    eps: float,
    delta: float = 0.1,
    seed: int = 0,
    cap: Optional[float] = None,
    probes: int = 64,
    restarts: int = 2,
    budget: int = 20,
) -> RecursiveResult:
    """
    Recursive root leverage score sampling for 1 <= p < 2.

    Each round scores the current matrix by leverage, calibrates alpha for the
    per-round budget eps / D with D = `root_leverage_divisor(n)` and keeps the
    calibrated draw. Rounds stop when the rows are at most `cap` (default
    `root_leverage_cap`), when a round no longer reduces the rows, or after
    `root_leverage_round_limit` rounds, the point where the log-row recurrence
    reaches cap. Each round records its recurrence row bound. Up to 10 seeds
    are tried when calibration exhausts its budget.
    """
    if not 1 <= p < 2:
        raise ExponentOutOfRange(f"Recursive root leverage sampling needs 1 <= p < 2, got {p}.")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}.")
    A = as_matrix(A)
    n, d = A.shape
    divisor = root_leverage_divisor(n)
    round_eps = min(eps / divisor, 0.99)
    cap = root_leverage_cap(d, p, n, eps) if cap is None else cap
    rounds = root_leverage_round_limit(n, p, cap)
    logger.info(
        "Recursive root leverage sampling stops at %.0f rows or after %d rounds (delta=%g).", cap, rounds, delta
    )
    B = A
    prov = _Provenance(n)
    trace: List[RoundRecord] = []

    for r in range(rounds):
        if B.shape[0] <= cap:
            break
        lev = leverage_scores(B)
        mass = float(np.sum(lev.values ** (p / 2.0)))
        accepted = None
        for attempt in range(MAX_RETRIES):
            round_seed = _round_seed(seed, r, attempt)
            try:
                accepted = calibrate_alpha(
                    B,
                    p,
                    round_eps,
                    seed=round_seed,
                    budget=budget,
                    probes=probes,
                    restarts=restarts,
                    builder=lambda alpha: root_leverage_plan(lev, p, alpha),
                    mass=mass,
                )
                break
            except BudgetExhausted:
                logger.warning("Round %d calibration with seed %d exhausted its budget; retrying.", r, round_seed)
        if accepted is None:
            raise RoundRetryExhausted(
                f"Round {r} found no acceptable draw in {MAX_RETRIES} attempts.", round_index=r, trace=trace
            )
        alpha, dr, report = accepted
        if dr.rows_kept >= B.shape[0]:
            logger.info("Round %d kept every row; stopping.", r)
            break
        trace.append(
            RoundRecord(
                round=r,
                rows_in=B.shape[0],
                rows_out=dr.rows_kept,
                lambda_est=report.lambda_est,
                total_sens_est=mass,
                alpha=alpha,
                seed=dr.seed,
                attempts=attempt + 1,
                rows_bound=root_leverage_rows_bound(n, p, cap, r + 1),
            )
        )
        prov.sampled(dr)
        B = apply(dr, B)

    report = distortion_between(A, B, p, probes, restarts, seed)
    logger.info("Recursive root leverage sampling kept %d of %d rows in %d rounds.", B.shape[0], n, len(trace))
    return RecursiveResult(
        matrix=B,
        trace=trace,
        source=prov.source,
        weights=prov.weights,
        p=float(p),
        report=report,
        total_sensitivity=float(np.sum(leverage_scores(B).values ** (p / 2.0))),
        stop_rows=cap,
    )


# ------------------------------------------
# Strategy classes
# ------------------------------------------
class RecursiveSampler(ABC):
    """
    Abstract base class for the recursive row samplers.
    """

    def __init__(
        self, p: float, eps: float, delta: float = 0.1, seed: int = 0, probes: int = 64, restarts: int = 2
    ):
        self.p = p
        self.eps = eps
        self.delta = delta
        self.seed = seed
        self.probes = probes
        self.restarts = restarts

    @abstractmethod
    def run(self, A: np.ndarray) -> RecursiveResult:
        pass


class RecursiveSensitivitySampler(RecursiveSampler):
    """Flatten by sensitivities, then half sample (p > 2)."""

    def __init__(self, p: float, eps: float, target: Optional[float] = None, **options):
        super().__init__(p, eps, **options)
        self.target = target

    def run(self, A: np.ndarray) -> RecursiveResult:
        return recursive_sensitivity(
            A, self.p, self.eps, self.delta, self.seed, self.target, self.probes, self.restarts
        )


class RecursiveRootLeverageSampler(RecursiveSampler):
    """Calibrated root leverage sampling rounds (1 <= p < 2)."""

    def __init__(self, p: float, eps: float, cap: Optional[float] = None, **options):
        super().__init__(p, eps, **options)
        self.cap = cap

    def run(self, A: np.ndarray) -> RecursiveResult:
        return recursive_root_leverage(A, self.p, self.eps, self.delta, self.seed, self.cap, self.probes, self.restarts)


class RecursiveSensLevSampler(RecursiveSampler):
    """Flatten by sensitivities and leverage, then half sample (p > 2)."""

    def __init__(self, p: float, eps: float, target: Optional[float] = None, **options):
        super().__init__(p, eps, **options)
        self.target = target

    def run(self, A: np.ndarray) -> RecursiveResult:
        return recursive_sens_lev(A, self.p, self.eps, self.delta, self.seed, self.target, self.probes, self.restarts)


def build_recursive_sampler(kind: str, p: float, eps: float, **options) -> RecursiveSampler:
    """
    Returns the sampler for 'sensitivity', 'rootlev' or 'senslev'.

    Parameters:
    - kind (str): Recursive scheme.
    - p (float): Exponent.
    - eps (float): Overall distortion budget.
    - options: delta, seed, probes and restarts passed to the sampler.

    Returns:
    - RecursiveSampler: Matching sampler instance.
    """
    if kind == "sensitivity":
        return RecursiveSensitivitySampler(p, eps, **options)
    elif kind == "rootlev":
        return RecursiveRootLeverageSampler(p, eps, **options)
    elif kind == "senslev":
        return RecursiveSensLevSampler(p, eps, **options)
    else:
        raise ValueError(f"Recursive sampler {kind!r} not supported! Choose 'sensitivity', 'rootlev' or 'senslev'.")
