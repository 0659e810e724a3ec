import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
import scipy.linalg

from lpcoreset.exceptions import ExponentOutOfRange, RankDeficient, ShapeMismatch
from lpcoreset.generators import gaussian_matrix, perturb_within_bound
from lpcoreset.matrix import as_matrix, coefficient_map, orthonormal_basis
from lpcoreset.rng import make_rng
from lpcoreset.sampling import SampleDraw, apply
from lpcoreset.scores import lp_sensitivities, total_sensitivity

logger = logging.getLogger(__name__)

MONOTONICITY_SLACK = 1e-10
BOUND_SLACK = 1e-9


# ------------------------------------------
# Distortion reports
# ------------------------------------------
@dataclass
class DistortionReport:
    """
    Estimate of the sampling error Lambda = sup_{||Ax||_p = 1} | ||SAx||_p^p - 1 |.

    Attributes:
    - lambda_lower (float): Value certified by the witness direction.
    - lambda_est (float): Best estimate; exact for method exact_l2.
    - witness (np.ndarray): Direction x attaining lambda_lower.
    - method (str): exact_l2, probe or optimize.
    - probes (int): Random directions evaluated.
    - restarts (int): Local ascent runs per sign.
    """

    lambda_lower: float
    lambda_est: float
    witness: np.ndarray
    method: str
    probes: int = 0
    restarts: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "lambda_lower": float(self.lambda_lower),
            "lambda_est": float(self.lambda_est),
            "method": self.method,
            "witness": [float(v) for v in self.witness],
            "probes": int(self.probes),
            "restarts": int(self.restarts),
        }


def witness_distortion(A: np.ndarray, B: np.ndarray, x: np.ndarray, p: float) -> float:
    """
    Evaluates | ||Bx||_p^p / ||Ax||_p^p - 1 | at a single direction x.
    """
    y = np.abs(A @ x)
    t = np.abs(B @ x)
    top = y.max()
    if top == 0:
        return 0.0
    return float(abs(np.sum((t / top) ** p) / np.sum((y / top) ** p) - 1.0))


def _ratio(U: np.ndarray, SU: np.ndarray, Z: np.ndarray, p: float) -> np.ndarray:
    return np.sum(np.abs(SU @ Z) ** p, axis=0) / np.sum(np.abs(U @ Z) ** p, axis=0)


def _ratio_grad(U: np.ndarray, SU: np.ndarray, z: np.ndarray, p: float) -> Tuple[float, np.ndarray]:
    y = U @ z
    t = SU @ z
    N = np.sum(np.abs(t) ** p)
    D = np.sum(np.abs(y) ** p)
    grad_N = p * (SU.T @ (np.sign(t) * np.abs(t) ** (p - 1)))
    grad_D = p * (U.T @ (np.sign(y) * np.abs(y) ** (p - 1)))
    rho = N / D
    return float(rho), (grad_N - rho * grad_D) / D


def _ascend(
    U: np.ndarray, SU: np.ndarray, z: np.ndarray, p: float, sign: float, max_iter: int, grad_tol: float
) -> Tuple[np.ndarray, float]:
    z = z / np.linalg.norm(z)
    rho, grad = _ratio_grad(U, SU, z, p)
    value = sign * rho
    step = 1.0
    for _ in range(max_iter):
        g = sign * grad
        g -= (g @ z) * z
        if np.linalg.norm(g) < grad_tol:
            break
        step *= 2.0
        for _ in range(60):
            z_try = z + step * g
            z_try /= np.linalg.norm(z_try)
            rho_try, grad_try = _ratio_grad(U, SU, z_try, p)
            if sign * rho_try > value:
                break
            step *= 0.5
        else:
            break
        z, grad, value = z_try, grad_try, sign * rho_try
    return z, value


def _estimate(
    U: np.ndarray,
    SU: np.ndarray,
    p: float,
    probes: int,
    restarts: int,
    seed: int,
    max_iter: int,
    grad_tol: float,
) -> np.ndarray:
    r = U.shape[1]
    rng = make_rng(seed)
    Z = rng.standard_normal((r, max(probes, 1)))
    Z = np.concatenate([np.eye(r), Z / np.linalg.norm(Z, axis=0)], axis=1)
    rho = _ratio(U, SU, Z, p)
    candidates = [(abs(rho[j] - 1.0), Z[:, j]) for j in (int(np.argmax(rho)), int(np.argmin(rho)))]

    for sign, start in ((1.0, Z[:, int(np.argmax(rho))]), (-1.0, Z[:, int(np.argmin(rho))])):
        for restart in range(restarts):
            z0 = start if restart == 0 else rng.standard_normal(r)
            z, value = _ascend(U, SU, z0, p, sign, max_iter, grad_tol)
            candidates.append((abs(sign * value - 1.0), z))

    return max(candidates, key=lambda c: c[0])[1]


def distortion_between(
    A: np.ndarray,
    B: np.ndarray,
    p: float,
    probes: int = 256,
    restarts: int = 8,
    seed: int = 0,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
) -> DistortionReport:
    """
    Lower-bounds sup | ||Bx||_p^p / ||Ax||_p^p - 1 | for B built from rescaled rows of A.

    Directions are parameterized by basis coordinates z (Ax = Uz). The search
    evaluates `probes` random unit directions plus the basis axes, then runs
    `restarts` projected gradient ascents per sign on the ratio, each with a
    backtracking step, `max_iter` iterations and gradient tolerance `grad_tol`.
    The first restart of each sign starts from the best probe.

    Parameters:
    - A (np.ndarray): Reference matrix.
    - B (np.ndarray): Compared matrix, rows in the row space of A.
    - p (float): Exponent.
    - probes (int): Random directions.
    - restarts (int): Ascent runs per sign.
    - seed (int): Stream seed.

    Returns:
    - DistortionReport: Certified lower bound with its witness.
    """
    A = as_matrix(A)
    B = as_matrix(B, allow_empty=True)
    if B.shape[1] != A.shape[1]:
        raise ShapeMismatch(f"Compared matrices have {A.shape[1]} and {B.shape[1]} columns.")
    basis = orthonormal_basis(A)
    X = coefficient_map(A, basis.U)
    z = _estimate(basis.U, B @ X, p, probes, restarts, seed, max_iter, grad_tol)
    witness = X @ z
    lower = witness_distortion(A, B, witness, p)
    return DistortionReport(
        lambda_lower=lower,
        lambda_est=lower,
        witness=witness,
        method="optimize" if restarts > 0 else "probe",
        probes=probes,
        restarts=restarts,
    )


def distortion_exact_l2(A: np.ndarray, dr: SampleDraw) -> DistortionReport:
    """
    Exact p = 2 sampling error from the extreme eigenvalues of (SU)^T (SU).

    Parameters:
    - A (np.ndarray): Sampled matrix.
    - dr (SampleDraw): Draw with p = 2.

    Returns:
    - DistortionReport: Lambda = max(lambda_max - 1, 1 - lambda_min) with an eigenvector witness.
    """
    if dr.p != 2:
        raise ExponentOutOfRange(f"Exact distortion is only available for p = 2, got {dr.p}.")
    B = apply(dr, A)
    A = as_matrix(A)
    basis = orthonormal_basis(A)
    SU = dr.weights[:, np.newaxis] * basis.U[dr.indices]
    eigvals, eigvecs = scipy.linalg.eigh(SU.T @ SU)
    top, bottom = eigvals[-1] - 1.0, 1.0 - eigvals[0]
    exact = float(max(top, bottom))
    v = eigvecs[:, -1] if top >= bottom else eigvecs[:, 0]
    witness = coefficient_map(A, basis.U) @ v
    lower = witness_distortion(A, B, witness, 2.0)
    return DistortionReport(
        lambda_lower=lower,
        lambda_est=max(exact, lower),
        witness=witness,
        method="exact_l2",
    )


def distortion_estimate(
    A: np.ndarray,
    dr: SampleDraw,
    probes: int = 256,
    restarts: int = 8,
    seed: int = 0,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
) -> DistortionReport:
    """
    Estimates the sampling error of a draw for general p (see distortion_between).
    """
    return distortion_between(A, apply(dr, A), dr.p, probes, restarts, seed, max_iter, grad_tol)


def measure_distortion(
    A: np.ndarray, dr: SampleDraw, probes: int = 256, restarts: int = 8, seed: int = 0
) -> DistortionReport:
    """
    Exact path for p = 2, estimator otherwise.
    """
    if dr.p == 2:
        return distortion_exact_l2(A, dr)
    return distortion_estimate(A, dr, probes, restarts, seed)


# ------------------------------------------
# Checks
# ------------------------------------------
@dataclass
class CheckResult:
    """
    Outcome of an inequality check; truthy iff it passed.

    Attributes:
    - name (str): Check identifier.
    - passed (bool): Whether lhs <= rhs held (with the documented slack).
    - lhs (float): Left-hand side.
    - rhs (float): Right-hand side.
    - detail (dict): Extra quantities.
    """

    name: str
    passed: bool
    lhs: float
    rhs: float
    detail: Dict[str, object] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.passed)

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "detail": self.detail,
        }


def check_embedding(
    A: np.ndarray,
    dr: SampleDraw,
    p: float,
    eps: float,
    probes: int = 256,
    restarts: int = 8,
    seed: int = 0,
) -> Tuple[CheckResult, DistortionReport]:
    """
    Tests ||SAx||_p^p = (1 +- eps) ||Ax||_p^p via the distortion estimate.

    Returns:
    - (CheckResult, DistortionReport): Pass iff lambda_est <= eps.
    """
    if p != dr.p:
        raise ValueError(f"Draw was built for p = {dr.p}, checked at p = {p}.")
    report = measure_distortion(A, dr, probes, restarts, seed)
    result = CheckResult(
        name="embedding",
        passed=report.lambda_est <= eps,
        lhs=report.lambda_est,
        rhs=eps,
        detail={"method": report.method, "rows_kept": dr.rows_kept},
    )
    return result, report


def check_vector_monotonicity(y: np.ndarray, p: float, q: float) -> CheckResult:
    """
    Checks max-share monotonicity of a vector between exponents p <= q.

    With r_p = ||y||_inf^p / ||y||_p^p this asserts
    r_p <= r_q and r_q <= r_p^(q/p) n^(q/p - 1), each with 1e-10 slack.
    """
    y = np.abs(np.asarray(y, dtype=np.float64)).ravel()
    if not q >= p > 0:
        raise ValueError(f"Need q >= p > 0, got p={p}, q={q}.")
    if not np.any(y):
        raise ValueError("Monotonicity needs a nonzero vector.")
    n = y.size
    scaled = y / y.max()
    r_p = 1.0 / np.sum(scaled**p)
    r_q = 1.0 / np.sum(scaled**q)
    reverse = r_p ** (q / p) * n ** (q / p - 1.0)
    forward_ok = r_p <= r_q + MONOTONICITY_SLACK
    reverse_ok = r_q <= reverse + MONOTONICITY_SLACK
    return CheckResult(
        name="vector_monotonicity",
        passed=bool(forward_ok and reverse_ok),
        lhs=float(r_p),
        rhs=float(r_q),
        detail={"reverse_bound": float(reverse), "forward": bool(forward_ok), "reverse": bool(reverse_ok)},
    )


def total_sensitivity_lower_bound(d: int, p: float) -> float:
    """d/2 for p >= 2, d^(p/2)/2 for p < 2."""
    return d / 2.0 if p >= 2 else d ** (p / 2.0) / 2.0


def check_total_sens_bounds(A: np.ndarray, p: float, tol: float = 1e-8) -> CheckResult:
    """
    Checks S^p(A) >= d/2 (p > 2) or d^(p/2)/2 (p < 2) for full column rank A.
    """
    A = as_matrix(A)
    basis = orthonormal_basis(A)
    if basis.rank < A.shape[1]:
        raise RankDeficient(f"Rank {basis.rank} below {A.shape[1]} columns.")
    total = total_sensitivity(lp_sensitivities(A, p, tol, basis=basis)).value
    bound = total_sensitivity_lower_bound(A.shape[1], p)
    return CheckResult(
        name="total_sensitivity_lower_bound",
        passed=total >= bound - BOUND_SLACK,
        lhs=bound,
        rhs=total,
    )


def check_perturbation_bound(A: np.ndarray, p: float, seed: int, tol: float = 1e-8) -> CheckResult:
    """
    Checks S^p(A + E) <= 2^p (S^p(A) + 1) for E from perturb_within_bound.
    """
    A = as_matrix(A)
    perturbed = perturb_within_bound(A, p, seed)
    before = total_sensitivity(lp_sensitivities(A, p, tol)).value
    after = total_sensitivity(lp_sensitivities(perturbed, p, tol)).value
    bound = 2.0**p * (before + 1.0) * (1.0 + 1e-6)
    return CheckResult(
        name="perturbation_bound",
        passed=after <= bound,
        lhs=after,
        rhs=bound,
        detail={"total_sensitivity_before": before},
    )


def check_gaussian_small_sens(
    n: int, d: int, p: float, seed: int, slack: float = 10.0, tol: float = 1e-8
) -> CheckResult:
    """
    Checks S^p(G) <= slack * (d ln(d+1))^(p/2) for an n x d standard Gaussian G, 1 <= p < 2.
    """
    if n < 256 * d:
        raise ValueError(f"Gaussian check needs n >= 256 d, got n={n}, d={d}.")
    if not 1 <= p < 2:
        raise ExponentOutOfRange(f"Gaussian check covers 1 <= p < 2, got {p}.")
    total = total_sensitivity(lp_sensitivities(gaussian_matrix(n, d, seed), p, tol)).value
    bound = slack * (d * np.log(d + 1.0)) ** (p / 2.0)
    return CheckResult(name="gaussian_small_sensitivity", passed=total <= bound, lhs=total, rhs=float(bound))
