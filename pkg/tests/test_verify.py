import numpy as np
import pytest

from lpcoreset.exceptions import ExponentOutOfRange, RankDeficient, ShapeMismatch
from lpcoreset.generators import GeneratorSpec, gaussian_matrix, generate
from lpcoreset.sampling import SampleDraw, apply, draw, half_plan
from lpcoreset.verify import (
    check_embedding,
    check_gaussian_small_sens,
    check_perturbation_bound,
    check_total_sens_bounds,
    check_vector_monotonicity,
    distortion_between,
    distortion_estimate,
    distortion_exact_l2,
    measure_distortion,
    total_sensitivity_lower_bound,
    witness_distortion,
)


def make_draw(indices, weights, n, p=2.0):
    return SampleDraw(
        indices=np.asarray(indices, dtype=np.int64),
        weights=np.asarray(weights, dtype=np.float64),
        seed=0,
        p=p,
        n=n,
    )


class TestExactL2:
    def test_identity_full_draw(self, identity3):
        report = distortion_exact_l2(identity3, make_draw([0, 1, 2], [1.0] * 3, 3))
        assert report.lambda_est == pytest.approx(0.0, abs=1e-12)
        assert report.method == "exact_l2"

    def test_half_of_constant_column(self, ones4):
        balanced = distortion_exact_l2(ones4, make_draw([0, 1], [np.sqrt(2)] * 2, 4))
        assert balanced.lambda_est == pytest.approx(0.0, abs=1e-12)
        single = distortion_exact_l2(ones4, make_draw([0], [np.sqrt(2)], 4))
        assert single.lambda_est == pytest.approx(0.5, rel=1e-12)
        assert single.lambda_lower == pytest.approx(0.5, rel=1e-12)

    def test_empty_draw(self, identity3):
        report = distortion_exact_l2(identity3, make_draw([], [], 3))
        assert report.lambda_est == pytest.approx(1.0)

    def test_requires_p2(self, identity3):
        with pytest.raises(ExponentOutOfRange):
            distortion_exact_l2(identity3, make_draw([0], [1.0], 3, p=3.0))


class TestEstimator:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exact_at_p2(self, seed):
        A = gaussian_matrix(40, 1 + seed % 4, seed)
        dr = draw(half_plan(40), seed)
        exact = distortion_exact_l2(A, dr)
        estimate = distortion_estimate(A, dr, probes=128, restarts=8, seed=seed)
        assert estimate.lambda_est == pytest.approx(exact.lambda_est, abs=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    def test_matches_exact_with_full_effort(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 7))
        A = gaussian_matrix(int(rng.integers(40, 120)), d, seed)
        dr = draw(half_plan(A.shape[0]), seed + 1)
        exact = distortion_exact_l2(A, dr)
        estimate = distortion_estimate(A, dr, probes=256, restarts=8, seed=seed)
        assert estimate.lambda_est == pytest.approx(exact.lambda_est, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_never_exceeds_exact(self, seed):
        A = gaussian_matrix(30, 3, seed)
        dr = draw(half_plan(30), seed + 100)
        estimate = distortion_estimate(A, dr, probes=32, restarts=1, seed=seed)
        assert estimate.lambda_est <= distortion_exact_l2(A, dr).lambda_est + 1e-9

    def test_single_column_closed_form(self):
        a = gaussian_matrix(50, 1, 3)
        dr = draw(half_plan(50, p=3.0), 5)
        kept = np.sum((dr.weights * np.abs(a[dr.indices, 0])) ** 3)
        expected = abs(kept / np.sum(np.abs(a[:, 0]) ** 3) - 1.0)
        report = distortion_estimate(a, dr, probes=4, restarts=1)
        assert report.lambda_est == pytest.approx(expected, rel=1e-10)

    def test_witness_certifies_lower_bound(self, gaussian_200x4):
        dr = draw(half_plan(200, p=3.0), 1)
        report = distortion_estimate(gaussian_200x4, dr, probes=64, restarts=2, seed=4)
        again = distortion_estimate(gaussian_200x4, dr, probes=64, restarts=2, seed=4)
        np.testing.assert_array_equal(report.witness, again.witness)
        value = witness_distortion(gaussian_200x4, apply(dr, gaussian_200x4), report.witness, 3.0)
        assert value == pytest.approx(report.lambda_lower, rel=1e-12)

    def test_random_directions_only_method(self, gaussian_200x4):
        dr = draw(half_plan(200, p=3.0), 1)
        assert distortion_estimate(gaussian_200x4, dr, probes=16, restarts=0).method == "probe"

    def test_measure_dispatch(self, gaussian_200x4):
        assert measure_distortion(gaussian_200x4, draw(half_plan(200), 0)).method == "exact_l2"
        dr = draw(half_plan(200, p=1.5), 0)
        assert measure_distortion(gaussian_200x4, dr, probes=16, restarts=1).method == "optimize"

    def test_column_mismatch(self, identity3):
        with pytest.raises(ShapeMismatch):
            distortion_between(identity3, np.ones((2, 2)), 3.0)

    def test_report_record(self, identity3):
        record = distortion_exact_l2(identity3, make_draw([0, 1, 2], [1.0] * 3, 3)).to_dict()
        assert set(record) == {"lambda_lower", "lambda_est", "method", "witness", "probes", "restarts"}
        assert len(record["witness"]) == 3


class TestCheckEmbedding:
    def test_full_draw_passes(self, identity3):
        result, report = check_embedding(identity3, make_draw([0, 1, 2], [1.0] * 3, 3), 2.0, 0.1)
        assert result and result.lhs == pytest.approx(0.0, abs=1e-12)
        assert result.to_dict()["passed"] is True

    def test_empty_draw_fails(self, identity3):
        result, _ = check_embedding(identity3, make_draw([], [], 3), 2.0, 0.5)
        assert not result

    def test_exponent_mismatch(self, identity3):
        with pytest.raises(ValueError):
            check_embedding(identity3, make_draw([0], [1.0], 3), 3.0, 0.5)


class TestVectorMonotonicity:
    def test_example(self):
        result = check_vector_monotonicity(np.array([3.0, 1.0, 1.0, 1.0]), 1.0, 2.0)
        assert result
        assert result.lhs == pytest.approx(0.5)
        assert result.rhs == pytest.approx(0.75)
        assert result.detail["reverse_bound"] == pytest.approx(1.0)

    def test_uniform_vector_is_tight(self):
        result = check_vector_monotonicity(np.ones(7), 1.5, 4.0)
        assert result
        assert result.lhs == pytest.approx(1 / 7) and result.detail["reverse_bound"] == pytest.approx(1 / 7)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_vectors(self, seed):
        y = np.random.default_rng(seed).standard_normal(25)
        assert check_vector_monotonicity(y, 1.0 + seed / 5, 2.0 + seed / 2)

    @pytest.mark.slow
    def test_thousand_random_vectors(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            p, q = np.sort(rng.uniform(1.0, 8.0, size=2))
            y = rng.standard_normal(int(rng.integers(2, 60)))
            result = check_vector_monotonicity(y, p, q)
            assert result, (p, q, result.lhs, result.rhs)
            assert result.detail["reverse_bound"] >= result.lhs * (1 - 1e-12)

    def test_rejects_order(self):
        with pytest.raises(ValueError):
            check_vector_monotonicity(np.ones(3), 3.0, 2.0)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            check_vector_monotonicity(np.zeros(3), 1.0, 2.0)


class TestSensitivityChecks:
    def test_lower_bound_values(self):
        assert total_sensitivity_lower_bound(4, 3.0) == 2.0
        assert total_sensitivity_lower_bound(4, 1.0) == 1.0

    def test_total_sens_identity(self, identity3):
        result = check_total_sens_bounds(identity3, 3.0)
        assert result and result.rhs == pytest.approx(3.0, rel=1e-6)

    def test_total_sens_rank_deficient(self):
        with pytest.raises(RankDeficient):
            check_total_sens_bounds(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), 3.0)

    def test_perturbation(self):
        assert check_perturbation_bound(gaussian_matrix(60, 3, 2), 3.0, seed=0)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(30))
    def test_perturbation_across_families(self, seed):
        specs = [
            GeneratorSpec("gaussian", n=60, d=3, seed=seed),
            GeneratorSpec("vandermonde_features", n=60, k=1, q=2, seed=seed),
            GeneratorSpec("low_rank_sparse", n=60, d=4, k=2, s=1, seed=seed),
        ]
        p = (1.5, 3.0)[seed % 2]
        result = check_perturbation_bound(generate(specs[seed % 3]), p, seed=seed)
        assert result, (result.lhs, result.rhs)

    @pytest.mark.slow
    @pytest.mark.parametrize("p", [1.0, 1.5])
    def test_gaussian_small_sensitivity_tall(self, p):
        result = check_gaussian_small_sens(4096, 4, p, seed=0)
        assert result and result.rhs == pytest.approx(10.0 * (4 * np.log(5.0)) ** (p / 2))

    def test_gaussian_small_sensitivity(self):
        assert check_gaussian_small_sens(512, 2, 1.5, seed=0)

    def test_gaussian_tiny_slack_fails(self):
        result = check_gaussian_small_sens(512, 2, 1.5, seed=0, slack=0.01)
        assert not result and result.lhs > result.rhs

    def test_gaussian_needs_tall_matrix(self):
        with pytest.raises(ValueError):
            check_gaussian_small_sens(100, 2, 1.5, seed=0)

    def test_gaussian_exponent_range(self):
        with pytest.raises(ExponentOutOfRange):
            check_gaussian_small_sens(512, 2, 2.0, seed=0)
