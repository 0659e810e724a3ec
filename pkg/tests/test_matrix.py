import numpy as np
import pytest

from lpcoreset.exceptions import AllZeroMatrix, ExponentOutOfRange, MatrixFormatError
from lpcoreset.generators import gaussian_matrix
from lpcoreset.matrix import (
    as_matrix,
    coefficient_map,
    gram_pinv,
    lp_norm,
    orthonormal_basis,
    read_matrix_csv,
    spectral_norm,
    write_matrix_csv,
)


class TestAsMatrix:
    def test_vector_becomes_column(self):
        assert as_matrix([1.0, 2.0, 3.0]).shape == (3, 1)

    def test_rejects_nan(self):
        with pytest.raises(MatrixFormatError):
            as_matrix([[1.0, np.nan]])

    def test_rejects_empty_unless_allowed(self):
        with pytest.raises(MatrixFormatError):
            as_matrix(np.zeros((0, 2)))
        assert as_matrix(np.zeros((0, 2)), allow_empty=True).shape == (0, 2)


class TestOrthonormalBasis:
    def test_identity(self, identity3):
        basis = orthonormal_basis(identity3)
        assert basis.rank == 3
        np.testing.assert_allclose(basis.U, np.eye(3), atol=1e-12)

    def test_rank_one(self):
        basis = orthonormal_basis(np.array([[1.0, 2.0], [2.0, 4.0]]), rank_tol=1e-10)
        assert basis.rank == 1
        np.testing.assert_allclose(basis.U[:, 0], np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-12)

    def test_orthogonal_columns(self):
        basis = orthonormal_basis(np.array([[3.0, 0.0], [0.0, 4.0], [0.0, 0.0]]))
        np.testing.assert_allclose(np.abs(basis.U), [[1, 0], [0, 1], [0, 0]], atol=1e-12)

    def test_all_zero(self):
        with pytest.raises(AllZeroMatrix):
            orthonormal_basis(np.zeros((3, 2)))

    @pytest.mark.parametrize("seed", range(20))
    def test_random_gaussian(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(10, 500)), int(rng.integers(1, 11))
        A = gaussian_matrix(max(n, d), d, seed)
        U = orthonormal_basis(A).U
        assert np.max(np.abs(U.T @ U - np.eye(U.shape[1]))) < 1e-10
        residual = A - U @ (U.T @ A)
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(A)

    def test_coefficient_map(self, gaussian_200x4):
        U = orthonormal_basis(gaussian_200x4).U
        X = coefficient_map(gaussian_200x4, U)
        np.testing.assert_allclose(gaussian_200x4 @ X, U, atol=1e-10)


class TestGramPinv:
    def test_identity(self):
        np.testing.assert_allclose(gram_pinv(np.eye(2)), np.eye(2), atol=1e-12)

    def test_three_by_two(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose(gram_pinv(A), np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0, atol=1e-12)

    def test_column(self):
        np.testing.assert_allclose(gram_pinv(np.array([[1.0], [1.0]])), [[0.5]], atol=1e-12)

    def test_inverse_on_full_rank(self, gaussian_200x4):
        G = gaussian_200x4.T @ gaussian_200x4
        assert np.max(np.abs(G @ gram_pinv(gaussian_200x4) - np.eye(4))) < 1e-8


class TestLpNorm:
    def test_examples(self):
        assert lp_norm([3.0, 4.0], 2) == pytest.approx(5.0)
        assert lp_norm([1.0, 1.0, 1.0, 1.0], 1) == pytest.approx(4.0)
        assert lp_norm([2.0, -1.0], 3) == pytest.approx(9.0 ** (1.0 / 3.0))

    def test_empty_vector(self):
        assert lp_norm([], 3) == 0.0

    def test_rejects_small_p(self):
        with pytest.raises(ExponentOutOfRange):
            lp_norm([1.0], 0.5)

    def test_scale_invariance_and_monotonicity(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = rng.standard_normal(20)
            p = rng.uniform(1, 6)
            c = rng.uniform(-1e3, 1e3)
            assert lp_norm(c * v, p) == pytest.approx(abs(c) * lp_norm(v, p), rel=1e-13)
            assert lp_norm(v, p + 1.0) <= lp_norm(v, p) * (1 + 1e-14)

    def test_no_overflow(self):
        assert lp_norm([1e300, 1e300], 4) == pytest.approx(1e300 * 2 ** 0.25)


class TestSpectralNorm:
    def test_matches_svd(self, gaussian_200x4):
        expected = np.linalg.norm(gaussian_200x4, 2)
        assert spectral_norm(gaussian_200x4, tol=1e-10) == pytest.approx(expected, rel=1e-6)


class TestMatrixCsv:
    def test_round_trip(self, tmp_path, gaussian_200x4):
        path = str(tmp_path / "A.csv")
        write_matrix_csv(gaussian_200x4, path)
        np.testing.assert_array_equal(read_matrix_csv(path), gaussian_200x4)

    def test_round_trip_is_exact(self, tmp_path):
        A = np.random.default_rng(4).standard_normal((20, 40)) * 10.0 ** np.arange(-20, 20)
        path = str(tmp_path / "wide.csv")
        write_matrix_csv(A, path)
        restored = read_matrix_csv(path)
        assert np.array_equal(restored, A)

    def test_line_endings(self, tmp_path):
        path = tmp_path / "A.csv"
        write_matrix_csv(np.array([[1.0, 2.5], [3.0, 4.0]]), str(path))
        assert path.read_bytes() == b"1,2.5\n3,4\n"

    @pytest.mark.parametrize("content", ["1,2\n3\n", "1,2\n3,4,5\n", "1,x\n"])
    def test_rejects_bad_files(self, tmp_path, content):
        path = tmp_path / "bad.csv"
        path.write_text(content)
        with pytest.raises(MatrixFormatError):
            read_matrix_csv(str(path))
