import logging
from typing import Callable, Optional, Tuple

import numpy as np

from lpcoreset.exceptions import BudgetExhausted, ExponentOutOfRange
from lpcoreset.matrix import as_matrix
from lpcoreset.sampling import (
    SampleDraw,
    SamplingPlan,
    draw,
    lewis_plan,
    root_leverage_plan,
    sensitivity_plan,
)
from lpcoreset.scores import ScoreVector, leverage_scores, lewis_weights, lp_sensitivities
from lpcoreset.verify import DistortionReport, measure_distortion

logger = logging.getLogger(__name__)

CALIBRATION_METHODS = ("sensitivity", "rootlev", "lewis")
DRAWS_PER_ALPHA = 5


def initial_alpha(eps: float, mass: float, p: float) -> float:
    """
    Starting oversampling parameter eps^2 * S^(1 - 2/p), or eps^2 * S^(2/p - 1) for p < 2.

    Parameters:
    - eps (float): Target distortion.
    - mass (float): Score mass S the plan spreads over the rows.
    - p (float): Exponent.

    Returns:
    - float: alpha_0 > 0.
    """
    exponent = 1.0 - 2.0 / p if p >= 2 else 2.0 / p - 1.0
    return eps**2 * max(mass, np.finfo(float).tiny) ** exponent


def plan_builder(A: np.ndarray, p: float, method: str, tol: float = 1e-8) -> Tuple[Callable[[float], SamplingPlan], float]:
    """
    Scores A once and returns (alpha -> plan, score mass) for a calibration method.

    Parameters:
    - A (np.ndarray): Input matrix.
    - p (float): Exponent.
    - method (str): 'sensitivity', 'rootlev' or 'lewis'.
    - tol (float): Solver tolerance for the scores.

    Returns:
    - (callable, float): Plan factory and total score mass.
    """
    if method == "sensitivity":
        s: ScoreVector = lp_sensitivities(A, p, tol)
        return (lambda alpha: sensitivity_plan(s, alpha)), s.total
    elif method == "rootlev":
        if not 1 <= p < 2:
            raise ExponentOutOfRange(f"Root leverage sampling needs 1 <= p < 2, got {p}.")
        lev = leverage_scores(A)
        return (lambda alpha: root_leverage_plan(lev, p, alpha)), float(np.sum(lev.values ** (p / 2.0)))
    elif method == "lewis":
        w = lewis_weights(A, p, tol)
        return (lambda alpha: lewis_plan(w, w.total / alpha)), w.total
    else:
        raise ValueError(f"Calibration method {method!r} not supported! Choose 'sensitivity', 'rootlev' or 'lewis'.")


def calibrate_alpha(
    A: np.ndarray,
    p: float,
    eps: float,
    method: str = "sensitivity",
    seed: int = 0,
    budget: int = 20,
    probes: int = 128,
    restarts: int = 4,
    builder: Optional[Callable[[float], SamplingPlan]] = None,
    mass: Optional[float] = None,
) -> Tuple[float, SampleDraw, DistortionReport]:
    """
    Halving search for the largest tested alpha whose draws are eps-embeddings.

    Starting from `initial_alpha`, each candidate alpha is judged by the median
    estimated distortion of 5 draws with seeds seed, ..., seed + 4. The search
    halves alpha until that median is at most eps, using at most `budget`
    halvings.

    Parameters:
    - A (np.ndarray): Matrix to sample.
    - p (float): Exponent.
    - eps (float): Target distortion in (0, 1).
    - method (str): 'sensitivity', 'rootlev' or 'lewis'.
    - seed (int): Base seed.
    - budget (int): Maximum number of halvings.
    - probes (int): Probe directions per distortion estimate.
    - restarts (int): Ascent restarts per distortion estimate.
    - builder (callable, optional): Precomputed alpha -> plan factory.
    - mass (float, optional): Score mass matching `builder`.

    Returns:
    - (float, SampleDraw, DistortionReport): Accepted alpha, its median draw and that draw's report.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}.")
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}.")
    A = as_matrix(A)
    if builder is None:
        builder, mass = plan_builder(A, p, method)
    elif mass is None:
        raise ValueError("A custom plan builder needs its score mass.")
    alpha = initial_alpha(eps, mass, p)

    best = None
    for halving in range(budget + 1):
        plan = builder(alpha)
        trials = []
        for j in range(DRAWS_PER_ALPHA):
            dr = draw(plan, seed + j)
            trials.append((measure_distortion(A, dr, probes, restarts, seed + j).lambda_est, j, dr))
        trials.sort(key=lambda t: (t[0], t[1]))
        median_lambda, _, median_draw = trials[DRAWS_PER_ALPHA // 2]
        report = measure_distortion(A, median_draw, probes, restarts, median_draw.seed)
        logger.debug("alpha=%.4g: median distortion %.4g over %d draws.", alpha, median_lambda, DRAWS_PER_ALPHA)

        if best is None or median_lambda < best[1]:
            best = (alpha, median_lambda, median_draw, report)
        if median_lambda <= eps:
            logger.info(
                "Accepted alpha=%.4g after %d halvings (median distortion %.4g, %d rows).",
                alpha,
                halving,
                median_lambda,
                median_draw.rows_kept,
            )
            return alpha, median_draw, report
        alpha /= 2.0

    raise BudgetExhausted(
        f"No alpha reached distortion {eps} within {budget} halvings (best {best[1]:.4g}).",
        best_alpha=best[0],
        draw=best[2],
        report=best[3],
    )
