import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from lpcoreset.exceptions import ExponentOutOfRange, NoConvergence

logger = logging.getLogger(__name__)

FLOOR_FACTOR = 1e-12
ARMIJO = 1e-4
MAX_HALVINGS = 30
# relative objective noise below which a step is judged by its KKT residual
ROUNDOFF = 1e-12


@dataclass
class IRLSResult:
    """
    Outcome of a constrained l_p minimization.

    Attributes:
    - z (np.ndarray): Minimizer estimate, satisfying c^T z = 1.
    - objective (float): ||M z||_p^p at z.
    - iterations (int): Iterations used.
    - converged (bool): Whether the KKT residual fell below tol.
    - residual (float): KKT residual at z (0 for an optimal linear program at p = 1).
    """

    z: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual: float


def _objective(r: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(r) ** p))


def _weighted_step(M: np.ndarray, c: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # argmin sum_j w_j [Mz]_j^2 s.t. c^T z = 1  is  G^-1 c / (c^T G^-1 c)
    G = M.T @ (weights[:, np.newaxis] * M)
    try:
        h = scipy.linalg.solve(G, c, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        h = scipy.linalg.lstsq(G, c)[0]
    return h / (c @ h)


def kkt_residual(M: np.ndarray, c: np.ndarray, p: float, z: np.ndarray) -> float:
    """
    Relative norm of the part of grad ||Mz||_p^p orthogonal to the constraint normal c.

    Parameters:
    - M (np.ndarray): m x r design.
    - c (np.ndarray): Constraint normal.
    - p (float): Exponent.
    - z (np.ndarray): Candidate point.

    Returns:
    - float: 0 at an exact stationary point.
    """
    r = M @ z
    g = p * (M.T @ (np.sign(r) * np.abs(r) ** (p - 1)))
    norm_g = np.linalg.norm(g)
    if norm_g == 0:
        return 0.0
    orth = g - (g @ c) / (c @ c) * c
    return float(np.linalg.norm(orth) / norm_g)


def l1_min_constrained(M: np.ndarray, c: np.ndarray) -> IRLSResult:
    """
    Solves min ||M z||_1 s.t. c^T z = 1 exactly as a linear program.

    HiGHS solves the dual max lam s.t. M^T y = lam c, |y_j| <= 1, which has only
    r equality rows; z is read off the equality multipliers and rescaled onto
    c^T z = 1.

    Parameters:
    - M (np.ndarray): m x r design matrix.
    - c (np.ndarray): Constraint normal of length r.

    Returns:
    - IRLSResult: The LP optimum.

    Raises:
    - NoConvergence: When HiGHS does not report an optimal solution.
    """
    M = np.asarray(M, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, r = M.shape
    cost = np.zeros(m + 1)
    cost[-1] = -1.0
    A_eq = np.column_stack([M.T, -c])
    bounds = [(-1.0, 1.0)] * m + [(None, None)]

    res = linprog(cost, A_eq=A_eq, b_eq=np.zeros(r), bounds=bounds, method="highs")
    if res.status != 0 or res.x is None:
        raise NoConvergence(f"l_1 linear program failed: {res.message}", best=None, residual=float("inf"))
    z = np.asarray(res.eqlin.marginals, dtype=np.float64)
    scale = c @ z
    if not np.isfinite(scale) or abs(scale) < np.finfo(float).eps * np.linalg.norm(c) * np.linalg.norm(z):
        raise NoConvergence("l_1 linear program returned no usable multipliers.", best=None, residual=float("inf"))
    z = z / scale
    iterations = int(getattr(res, "nit", 0))
    return IRLSResult(z=z, objective=_objective(M @ z, 1.0), iterations=iterations, converged=True, residual=0.0)


def lp_min_constrained(
    M: np.ndarray,
    c: np.ndarray,
    p: float,
    tol: float = 1e-8,
    max_iter: int = 500,
    z0: np.ndarray = None,
) -> IRLSResult:
    """
    Minimizes ||M z||_p^p subject to c^T z = 1.

    p = 1 is solved as a linear program (`l1_min_constrained`). For p > 1 the
    solver runs a Newton iteration built from the IRLS step: rows are weighted
    by w_j = max(|r_j|, floor)^(p-2), floor = 1e-12 * ||r||_inf, the weighted
    least-squares problem is solved in closed form, and z + eta (z_new - z) is
    taken with eta starting at the Newton length 1/(p-1), halved until Armijo
    decrease. A step whose objective change is at roundoff level is accepted
    when it lowers the KKT residual. Iteration stops once the KKT residual is
    at most tol.

    Parameters:
    - M (np.ndarray): m x r design matrix.
    - c (np.ndarray): Constraint normal of length r (nonzero).
    - p (float): Exponent, p >= 1.
    - tol (float): KKT residual at convergence.
    - max_iter (int): Iteration cap.
    - z0 (np.ndarray, optional): Feasible start; defaults to the l_2 solution.

    Returns:
    - IRLSResult: Converged iterate and diagnostics.

    Raises:
    - NoConvergence: When the cap is hit or the line search stalls, carrying the best iterate and its KKT residual.
    """
    if not (p >= 1 and np.isfinite(p)):
        raise ExponentOutOfRange(f"IRLS needs finite p >= 1, got {p}.")
    M = np.asarray(M, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if p == 1:
        return l1_min_constrained(M, c)

    z = _weighted_step(M, c, np.ones(M.shape[0])) if z0 is None else np.asarray(z0, dtype=np.float64)
    r = M @ z
    f = _objective(r, p)
    if p == 2 or f == 0:
        return IRLSResult(z=z, objective=f, iterations=0, converged=True, residual=0.0)

    eta0 = 1.0 / (p - 1.0)
    residual = kkt_residual(M, c, p, z)
    for it in range(max_iter):
        if residual <= tol:
            logger.debug("IRLS converged after %d iterations, objective %.12g.", it, f)
            return IRLSResult(z=z, objective=f, iterations=it, converged=True, residual=residual)

        floor = FLOOR_FACTOR * np.max(np.abs(r))
        weights = np.maximum(np.abs(r), floor) ** (p - 2.0)
        direction = _weighted_step(M, c, weights) - z
        slope = p * float((np.sign(r) * np.abs(r) ** (p - 1.0)) @ (M @ direction))

        eta = eta0
        for _ in range(MAX_HALVINGS):
            z_try = z + eta * direction
            r_try = M @ z_try
            f_try = _objective(r_try, p)
            if slope < 0 and f_try <= f + ARMIJO * eta * slope:
                break
            if f_try <= f * (1.0 + ROUNDOFF):
                residual_try = kkt_residual(M, c, p, z_try)
                if residual_try < residual:
                    break
            eta *= 0.5
        else:
            raise NoConvergence(
                f"IRLS line search stalled at iteration {it} with KKT residual {residual:.3g} > {tol}.",
                best=z,
                residual=residual,
            )

        z, r, f = z_try, r_try, f_try
        residual = kkt_residual(M, c, p, z)

    if residual <= tol:
        return IRLSResult(z=z, objective=f, iterations=max_iter, converged=True, residual=residual)
    raise NoConvergence(
        f"IRLS did not reach KKT residual {tol} in {max_iter} iterations (last {residual:.3g}).",
        best=z,
        residual=residual,
    )
