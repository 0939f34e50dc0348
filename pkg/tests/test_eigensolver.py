import numpy as np
import pytest

from eigcolloc import (
    RankDeficiencyError,
    SolverError,
    m_orthonormalize,
    solve_gevp,
)


def random_pencil(n, seed):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n, n))
    K = R + R.T
    Q = rng.standard_normal((n, n))
    M = Q @ Q.T + n * np.eye(n)
    return K, M


class TestSolveGevp:
    def test_diagonal_example(self):
        # I u = mu diag(4,1) u: values 1/4 and 1, axis-aligned vectors
        d = solve_gevp(np.eye(2), np.diag([4.0, 1.0]))
        assert d.values == pytest.approx([0.25, 1.0], abs=1e-14)
        assert d.vectors[:, 0] == pytest.approx([0.5, 0.0], abs=1e-14)
        assert d.vectors[:, 1] == pytest.approx([0.0, 1.0], abs=1e-14)

    def test_mass_orthonormality_and_residual(self):
        K, M = random_pencil(12, 1)
        d = solve_gevp(K, M)
        assert np.allclose(d.vectors.T @ M @ d.vectors, np.eye(12), atol=1e-12)
        res = K @ d.vectors - M @ d.vectors @ np.diag(d.values)
        assert np.abs(res).max() < 1e-10

    def test_values_ascending(self):
        K, M = random_pencil(20, 2)
        d = solve_gevp(K, M)
        assert np.all(np.diff(d.values) >= 0)

    def test_subset_matches_full(self):
        K, M = random_pencil(15, 3)
        full = solve_gevp(K, M)
        part = solve_gevp(K, M, k=4)
        assert part.k == 4
        assert part.values == pytest.approx(full.values[:4], abs=1e-12)
        for j in range(4):
            # same vector up to sign; sign convention should make them equal
            assert part.vectors[:, j] == pytest.approx(full.vectors[:, j], abs=1e-9)

    def test_deterministic_repeat(self):
        K, M = random_pencil(10, 4)
        a = solve_gevp(K, M, k=3)
        b = solve_gevp(K, M, k=3)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.vectors, b.vectors)

    def test_sign_convention(self):
        K, M = random_pencil(9, 5)
        d = solve_gevp(K, M)
        for j in range(9):
            col = d.vectors[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_indefinite_mass_rejected(self):
        with pytest.raises(SolverError):
            solve_gevp(np.eye(2), np.diag([1.0, -1.0]))

    def test_bad_subset_size(self):
        with pytest.raises(SolverError):
            solve_gevp(np.eye(3), np.eye(3), k=4)

    def test_shape_mismatch(self):
        with pytest.raises(SolverError):
            solve_gevp(np.eye(3), np.eye(2))


class TestMOrthonormalize:
    def test_produces_mass_orthonormal_columns(self):
        rng = np.random.default_rng(6)
        V = rng.standard_normal((10, 4))
        Q = rng.standard_normal((10, 10))
        M = Q @ Q.T + 10 * np.eye(10)
        U = m_orthonormalize(V, M)
        assert np.allclose(U.T @ M @ U, np.eye(4), atol=1e-12)

    def test_preserves_leading_spans(self):
        # Gram-Schmidt is triangular: first j columns span the same space
        rng = np.random.default_rng(7)
        V = rng.standard_normal((8, 3))
        M = np.eye(8)
        U = m_orthonormalize(V, M)
        for j in (1, 2, 3):
            P = V[:, :j] @ np.linalg.pinv(V[:, :j])
            assert np.allclose(P @ U[:, :j], U[:, :j], atol=1e-10)

    def test_sign_convention_first_nonzero_positive(self):
        U = m_orthonormalize(np.array([[-2.0, 0.0], [0.0, 3.0]]), np.eye(2))
        assert U[0, 0] > 0 and U[1, 1] > 0

    def test_rank_deficiency_detected(self):
        V = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
        with pytest.raises(RankDeficiencyError) as err:
            m_orthonormalize(V, np.eye(3))
        assert err.value.column == 1

    def test_zero_column_rejected(self):
        V = np.zeros((3, 1))
        with pytest.raises(RankDeficiencyError):
            m_orthonormalize(V, np.eye(3))

    def test_idempotent_on_orthonormal_input(self):
        rng = np.random.default_rng(8)
        V = rng.standard_normal((6, 3))
        M = np.eye(6)
        U = m_orthonormalize(V, M)
        again = m_orthonormalize(U, M)
        assert np.allclose(U, again, atol=1e-13)
