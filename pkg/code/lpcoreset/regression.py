import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from lpcoreset.calibrate import calibrate_alpha
from lpcoreset.exceptions import ShapeMismatch
from lpcoreset.irls import lp_min_constrained
from lpcoreset.matrix import as_matrix, lp_norm
from lpcoreset.sampling import apply

logger = logging.getLogger(__name__)


@dataclass
class RegressionReport:
    """
    Comparison of full and coreset l_p regression.

    Attributes:
    - x_full (np.ndarray): Minimizer on all rows.
    - x_coreset (np.ndarray): Minimizer on the sampled rows.
    - full_cost (float): ||A x_full - b||_p.
    - coreset_cost (float): ||A x_coreset - b||_p on all rows.
    - ratio (float): (coreset_cost / full_cost)^p.
    - rows_kept (int): Sampled rows.
    - alpha (float): Calibrated oversampling parameter.
    - lambda_est (float): Estimated distortion of the draw on [A, b].
    """

    x_full: np.ndarray
    x_coreset: np.ndarray
    full_cost: float
    coreset_cost: float
    ratio: float
    rows_kept: int
    alpha: float
    lambda_est: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "x_full": [float(v) for v in self.x_full],
            "x_coreset": [float(v) for v in self.x_coreset],
            "full_cost": float(self.full_cost),
            "coreset_cost": float(self.coreset_cost),
            "ratio": float(self.ratio),
            "rows_kept": int(self.rows_kept),
            "alpha": float(self.alpha),
            "lambda_est": float(self.lambda_est),
        }


def _split(M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return M[:, :-1], M[:, -1]


def lp_regression(
    A: np.ndarray, b: np.ndarray, p: float, tol: float = 1e-9, max_iter: int = 500
) -> Tuple[np.ndarray, float]:
    """
    Solves min_x ||Ax - b||_p by constrained IRLS on [A, -b] with the last coordinate fixed to 1.

    Parameters:
    - A (np.ndarray): n x d design.
    - b (np.ndarray): Length-n target.
    - p (float): Exponent, p >= 1.
    - tol (float): KKT residual tolerance of the solver.
    - max_iter (int): Iteration cap.

    Returns:
    - (np.ndarray, float): Minimizer x and its cost ||Ax - b||_p.
    """
    A = as_matrix(A, allow_empty=True)
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"Target has {b.shape[0]} entries for {A.shape[0]} rows.")
    M = np.column_stack([A, -b])
    c = np.zeros(M.shape[1])
    c[-1] = 1.0
    z = lp_min_constrained(M, c, p, tol=tol, max_iter=max_iter).z
    x = z[:-1] / z[-1]
    return x, lp_norm(A @ x - b, p)


def coreset_regression(
    A: np.ndarray,
    b: np.ndarray,
    p: float,
    eps: float,
    method: str = "sensitivity",
    seed: int = 0,
    budget: int = 20,
    probes: int = 128,
    restarts: int = 4,
) -> RegressionReport:
    """
    Solves l_p regression on a calibrated sample of the rows of [A, b].

    A draw that is an eps-embedding of [A, b] gives a coreset solution whose
    full-data cost ratio (coreset_cost / full_cost)^p is at most (1 + eps) / (1 - eps).

    Parameters:
    - A (np.ndarray): n x d design.
    - b (np.ndarray): Length-n target.
    - p (float): Exponent.
    - eps (float): Target distortion in (0, 1).
    - method (str): Calibration method ('sensitivity', 'rootlev' or 'lewis').
    - seed (int): Base seed.

    Returns:
    - RegressionReport: Both solutions and their costs on all rows.
    """
    A = as_matrix(A)
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"Target has {b.shape[0]} entries for {A.shape[0]} rows.")
    augmented = np.column_stack([A, b])
    alpha, dr, report = calibrate_alpha(augmented, p, eps, method, seed, budget, probes, restarts)
    SA, Sb = _split(apply(dr, augmented))

    x_full, full_cost = lp_regression(A, b, p)
    x_coreset, _ = lp_regression(SA, Sb, p)
    coreset_cost = lp_norm(A @ x_coreset - b, p)
    ratio = (coreset_cost / full_cost) ** p if full_cost > 0 else 1.0 if coreset_cost == 0 else np.inf
    logger.info("Coreset regression on %d of %d rows: cost ratio %.4g.", dr.rows_kept, A.shape[0], ratio)
    return RegressionReport(
        x_full=x_full,
        x_coreset=x_coreset,
        full_cost=full_cost,
        coreset_cost=coreset_cost,
        ratio=float(ratio),
        rows_kept=dr.rows_kept,
        alpha=alpha,
        lambda_est=report.lambda_est,
    )
