import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from lpcoreset.exceptions import ConfigError, FeatureOverflow, RankDeficient
from lpcoreset.matrix import DEFAULT_RANK_TOL, as_matrix, spectral_norm
from lpcoreset.rng import make_rng

logger = logging.getLogger(__name__)

FAMILIES = ("gaussian", "vandermonde_features", "low_rank_sparse", "perturbed")


# ------------------------------------------
# Function forms
# ------------------------------------------
def gaussian_matrix(n: int, d: int, seed: int) -> np.ndarray:
    """
    Returns an n x d matrix of i.i.d. standard normal entries.

    Entries come from the Philox stream of `make_rng(seed)` through numpy's
    ziggurat normal transform, filled row-major.
    """
    if n < 1 or d < 1:
        raise ValueError("gaussian_matrix requires n, d >= 1.")
    return make_rng(seed).standard_normal((n, d))


def vandermonde_features(A: np.ndarray, q: int) -> np.ndarray:
    """
    Horizontal concatenation of the degree-q Vandermonde matrices of the columns of A.

    Block b (0-based) of the n x k(q+1) output holds A[i, b]^j in column j = 0..q.

    Parameters:
    - A (np.ndarray): n x k base matrix.
    - q (int): Polynomial degree, q >= 1.

    Returns:
    - np.ndarray: Feature matrix.
    """
    A = as_matrix(A)
    if q < 1:
        raise ValueError(f"Degree q must be at least 1, got {q}.")
    with np.errstate(over="ignore"):
        blocks = [np.vander(A[:, b], q + 1, increasing=True) for b in range(A.shape[1])]
    V = np.concatenate(blocks, axis=1)
    if not np.all(np.isfinite(V)):
        raise FeatureOverflow(f"Degree-{q} features overflow the float range.")
    return V


def low_rank_plus_sparse(
    n: int, d: int, k: int, s: int, seed: int, return_parts: bool = False
):
    """
    Returns K + S with K = G1 G2 of rank <= k and exactly s Gaussian nonzeros per row of S.

    Parameters:
    - n, d (int): Output shape.
    - k (int): Rank of the low-rank part (0 gives K = 0).
    - s (int): Nonzeros per row of the sparse part, support drawn without replacement.
    - seed (int): Stream seed.
    - return_parts (bool): Also return (K, S).

    Returns:
    - np.ndarray, or (np.ndarray, np.ndarray, np.ndarray) when return_parts is set.
    """
    if not (0 <= k <= d and 0 <= s <= d):
        raise ValueError(f"Need 0 <= k, s <= d; got k={k}, s={s}, d={d}.")
    rng = make_rng(seed)
    K = rng.standard_normal((n, k)) @ rng.standard_normal((k, d)) if k else np.zeros((n, d))

    S = np.zeros((n, d))
    if s:
        support = np.argsort(rng.random((n, d)), axis=1)[:, :s]
        values = rng.standard_normal((n, s))
        # a Gaussian draw of exactly zero would shrink the support
        values[values == 0.0] = 1.0
        np.put_along_axis(S, support, values, axis=1)

    if return_parts:
        return K + S, K, S
    return K + S


def perturbation_bound(A: np.ndarray, p: float) -> float:
    """
    Returns sigma_min(A) / (2 n^(1+1/p)), the admissible spectral norm of a perturbation.
    """
    A = as_matrix(A)
    n, d = A.shape
    s = np.linalg.svd(A, compute_uv=False)
    if n < d or s[-1] < DEFAULT_RANK_TOL * s[0]:
        raise RankDeficient("Perturbation bound needs a full column rank matrix.")
    return float(s[-1] / (2.0 * n ** (1.0 + 1.0 / p)))


def perturb_within_bound(A: np.ndarray, p: float, seed: int) -> np.ndarray:
    """
    Returns A + E with E Gaussian, rescaled to spectral norm 0.99 * sigma_min / (2 n^(1+1/p)).

    Parameters:
    - A (np.ndarray): Full column rank matrix.
    - p (float): Exponent entering the bound.
    - seed (int): Stream seed for E.

    Returns:
    - np.ndarray: Perturbed matrix.
    """
    A = as_matrix(A)
    bound = perturbation_bound(A, p)
    G = make_rng(seed).standard_normal(A.shape)
    E = G * (0.99 * bound / spectral_norm(G, tol=1e-6, seed=seed))
    achieved = spectral_norm(E, tol=1e-6, seed=seed + 1)
    if achieved > bound * (1 + 1e-4):
        raise AssertionError(f"Perturbation norm {achieved} exceeds the bound {bound}.")
    logger.debug("Perturbation norm %.6g against bound %.6g.", achieved, bound)
    return A + E


# ------------------------------------------
# Generator specs and strategies
# ------------------------------------------
@dataclass
class GeneratorSpec:
    """
    Serializable description of a test matrix family.

    Attributes:
    - family (str): One of gaussian, vandermonde_features, low_rank_sparse, perturbed.
    - n (int): Rows.
    - d (int): Columns (gaussian, low_rank_sparse, perturbed).
    - k (int): Base columns for Vandermonde features, rank for low-rank + sparse.
    - q (int): Vandermonde degree.
    - s (int): Nonzeros per row of the sparse part.
    - p (float): Exponent for the perturbation bound.
    - seed (int): Stream seed.
    """

    family: str
    n: int
    d: int = 1
    k: int = 0
    q: int = 1
    s: int = 0
    p: float = 2.0
    seed: int = 0

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"Unknown generator family {self.family!r}; choose from {FAMILIES}.")
        if self.n < 1 or self.d < 1:
            raise ConfigError("Generator needs n, d >= 1.")
        width = self.k * (self.q + 1) if self.family == "vandermonde_features" else self.d
        if self.family != "low_rank_sparse" and self.n < width:
            raise ConfigError(f"Full-rank family needs n >= {width}, got n={self.n}.")

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


class MatrixGenerator(ABC):
    """
    Abstract base class for test matrix families.
    """

    def __init__(self, spec: GeneratorSpec):
        """
        Parameters:
        - spec (GeneratorSpec): Family parameters and seed.
        """
        spec.validate()
        self.spec = spec

    @abstractmethod
    def generate(self) -> np.ndarray:
        pass


class GaussianGenerator(MatrixGenerator):
    """Standard Gaussian n x d matrices."""

    def generate(self) -> np.ndarray:
        return gaussian_matrix(self.spec.n, self.spec.d, self.spec.seed)


class VandermondeGenerator(MatrixGenerator):
    """
    Polynomial features V^q(A) of an n x k Gaussian base matrix.
    """

    def generate(self) -> np.ndarray:
        base = gaussian_matrix(self.spec.n, max(self.spec.k, 1), self.spec.seed)
        return vandermonde_features(base, self.spec.q)


class LowRankSparseGenerator(MatrixGenerator):
    """
    Low-rank plus sparse matrices; keeps the parts of the last draw for auditing.
    """

    def __init__(self, spec: GeneratorSpec):
        super().__init__(spec)
        self.low_rank: Optional[np.ndarray] = None
        self.sparse: Optional[np.ndarray] = None

    def generate(self) -> np.ndarray:
        A, self.low_rank, self.sparse = low_rank_plus_sparse(
            self.spec.n, self.spec.d, self.spec.k, self.spec.s, self.spec.seed, return_parts=True
        )
        return A


class PerturbedGenerator(MatrixGenerator):
    """
    Gaussian matrix plus a perturbation at 0.99 of the admissible spectral norm.
    """

    def generate(self) -> np.ndarray:
        base = gaussian_matrix(self.spec.n, self.spec.d, self.spec.seed)
        return perturb_within_bound(base, self.spec.p, self.spec.seed + 1)


def build_generator(spec: GeneratorSpec) -> MatrixGenerator:
    """
    Returns the generator strategy for a spec's family.
    """
    generators = {
        "gaussian": GaussianGenerator,
        "vandermonde_features": VandermondeGenerator,
        "low_rank_sparse": LowRankSparseGenerator,
        "perturbed": PerturbedGenerator,
    }
    if spec.family not in generators:
        raise ConfigError(f"Unknown generator family {spec.family!r}; choose from {FAMILIES}.")
    return generators[spec.family](spec)


def generate(spec: GeneratorSpec) -> np.ndarray:
    """Shorthand for build_generator(spec).generate()."""
    return build_generator(spec).generate()
