import numpy as np
import pytest

from lpcoreset.exceptions import ExponentOutOfRange, InvalidScoreKind
from lpcoreset.flatten import (
    RowMap,
    SensitivityFlattener,
    build_flattener,
    flatten_sens_lev,
    flatten_sensitivities,
    flatten_uniform,
)
from lpcoreset.generators import gaussian_matrix
from lpcoreset.matrix import lp_norm
from lpcoreset.scores import leverage_scores, lp_sensitivities


# the first ten instances run in the quick suite, all fifty under -m slow
INSTANCES = [seed if seed < 10 else pytest.param(seed, marks=pytest.mark.slow) for seed in range(50)]


def spiky(seed):
    A = gaussian_matrix(60, 3, seed)
    rng = np.random.default_rng(seed)
    A[rng.choice(60, size=4, replace=False)] *= 10.0
    return A


def assert_norms_preserved(A, A_flat, p, seed=0):
    X = np.random.default_rng(seed).standard_normal((A.shape[1], 100))
    for x in X.T:
        assert lp_norm(A_flat @ x, p) == pytest.approx(lp_norm(A @ x, p), rel=1e-12)


class TestFlattenSensitivities:
    def test_hand_example(self):
        A = np.array([[10.0], [1.0]])
        s = lp_sensitivities(A, 1.0)
        A_flat, rowmap = flatten_sensitivities(A, 1.0, 1.0, s)
        np.testing.assert_allclose(A_flat, [[5.0], [5.0], [1.0]])
        np.testing.assert_array_equal(rowmap.source, [0, 0, 1])
        np.testing.assert_allclose(lp_sensitivities(A_flat, 1.0).values, [5 / 11, 5 / 11, 1 / 11])

    def test_unchanged_below_threshold(self, identity3):
        A_flat, rowmap = flatten_sensitivities(identity3, 3.0, 4.0, lp_sensitivities(identity3, 3.0))
        np.testing.assert_array_equal(A_flat, identity3)
        np.testing.assert_array_equal(rowmap.copies, [1, 1, 1])

    @pytest.mark.parametrize("seed", INSTANCES)
    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_postconditions(self, seed, p):
        A = spiky(seed)
        n, C = A.shape[0], 4.0
        s = lp_sensitivities(A, p, tol=1e-10)
        A_flat, _ = flatten_sensitivities(A, p, C, s)
        assert A_flat.shape[0] <= (1 + 1 / C) * n
        assert_norms_preserved(A, A_flat, p, seed)
        s_flat = lp_sensitivities(A_flat, p, tol=1e-10)
        assert s_flat.values.max() <= C * s.total / n + 1e-6
        assert s_flat.total == pytest.approx(s.total, rel=1e-6)

    def test_rejects_wrong_scores(self, identity3):
        with pytest.raises(InvalidScoreKind):
            flatten_sensitivities(identity3, 3.0, 4.0, leverage_scores(identity3))

    def test_rejects_small_c(self, identity3):
        with pytest.raises(ValueError):
            flatten_sensitivities(identity3, 3.0, 0.5, lp_sensitivities(identity3, 3.0))


class TestFlattenUniform:
    def test_identity_half(self):
        A_flat, rowmap = flatten_uniform(np.eye(2), 2.0, 0.5)
        assert A_flat.shape == (4, 2)
        np.testing.assert_allclose(A_flat, np.repeat(np.eye(2), 2, axis=0) / np.sqrt(2.0))
        np.testing.assert_allclose(leverage_scores(A_flat).values, [0.5] * 4, atol=1e-12)
        x = np.array([0.3, -1.7])
        assert lp_norm(A_flat @ x, 1.0) == pytest.approx(np.sqrt(2.0) * lp_norm(x, 1.0))

    def test_alpha_one_is_identity_map(self, gaussian_200x4):
        A_flat, _ = flatten_uniform(gaussian_200x4, 3.0, 1.0)
        np.testing.assert_array_equal(A_flat, gaussian_200x4)

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_row_count_and_norms(self, seed):
        A = spiky(seed)
        alpha, p = 0.3, 3.0
        A_flat, _ = flatten_uniform(A, p, alpha)
        k = int(np.ceil(1 / alpha))
        assert A_flat.shape[0] == A.shape[0] * k
        assert_norms_preserved(A, A_flat, p, seed)
        x = np.random.default_rng(seed).standard_normal(3)
        for q in (1.0, 2.0, 5.0):
            assert lp_norm(A_flat @ x, q) == pytest.approx(k ** (1 / q - 1 / p) * lp_norm(A @ x, q), rel=1e-12)
        for q in (1.5, 4.0):
            assert lp_sensitivities(A_flat, q).values.max() <= alpha + 1e-6

    @pytest.mark.parametrize("alpha", [0.0, 1.5])
    def test_rejects_alpha(self, identity3, alpha):
        with pytest.raises(ValueError):
            flatten_uniform(identity3, 2.0, alpha)


class TestFlattenSensLev:
    def test_requires_p_above_two(self, identity3):
        with pytest.raises(ExponentOutOfRange):
            flatten_sens_lev(identity3, 2.0, 4.0, leverage_scores(identity3))

    def test_unchanged_below_threshold(self, identity3):
        A_flat, _ = flatten_sens_lev(identity3, 3.0, 4.0, leverage_scores(identity3))
        np.testing.assert_array_equal(A_flat, identity3)

    @pytest.mark.parametrize("seed", INSTANCES)
    def test_postconditions(self, seed):
        A = spiky(seed)
        p, C = 4.0, 4.0
        n, d = A.shape
        lev = leverage_scores(A)
        A_flat, _ = flatten_sens_lev(A, p, C, lev)
        assert A_flat.shape[0] <= (1 + 1 / C) * n
        assert_norms_preserved(A, A_flat, p, seed)
        bound = (C * d / n) ** (2 / p) * lev.values.max() ** (1 - 2 / p)
        assert leverage_scores(A_flat).values.max() <= bound + 1e-6
        X = np.random.default_rng(seed).standard_normal((d, 100))
        assert np.all(np.linalg.norm(A_flat @ X, axis=0) >= np.linalg.norm(A @ X, axis=0) * (1 - 1e-12))
        s, s_flat = lp_sensitivities(A, p, tol=1e-10), lp_sensitivities(A_flat, p, tol=1e-10)
        assert s_flat.total == pytest.approx(s.total, rel=1e-6)


class TestRowMap:
    def test_reconstruct(self, spiky_gaussian):
        A_flat, rowmap = SensitivityFlattener(3.0, C=1.0).apply(spiky_gaussian)
        assert A_flat.shape[0] > spiky_gaussian.shape[0]
        np.testing.assert_allclose(rowmap.reconstruct(A_flat), spiky_gaussian, rtol=1e-12)
        assert rowmap.n_source == spiky_gaussian.shape[0]

    def test_records(self):
        _, rowmap = flatten_sensitivities(np.array([[10.0], [1.0]]), 1.0, 1.0, lp_sensitivities(np.array([[10.0], [1.0]]), 1.0))
        records = rowmap.to_records()
        assert records == [{"src": 0, "k": 2}, {"src": 1, "k": 1}]
        restored = RowMap.from_records(records, 1.0)
        np.testing.assert_array_equal(restored.source, rowmap.source)
        np.testing.assert_allclose(restored.scale, [0.5, 0.5, 1.0])


class TestBuildFlattener:
    @pytest.mark.parametrize("kind", ["sensitivity", "uniform", "senslev"])
    def test_kinds_preserve_norms(self, spiky_gaussian, kind):
        A_flat, _ = build_flattener(kind, 3.0, C=4.0, alpha=0.5).apply(spiky_gaussian)
        assert_norms_preserved(spiky_gaussian, A_flat, 3.0)

    def test_unknown(self):
        with pytest.raises(ValueError):
            build_flattener("random", 3.0)
