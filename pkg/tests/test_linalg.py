import numpy as np
import pytest

from doptprune.errors import NotPositiveDefinite
from doptprune.linalg import SpdMatrix, inv_sqrt_spd, spd_factorize, spd_inverse, sym_eigen


def random_spd(rng, m, lo=0.1, hi=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    vals = np.exp(rng.uniform(np.log(lo), np.log(hi), m))
    return SpdMatrix((q * vals) @ q.T)


class TestFactorize:
    def test_identity(self):
        assert spd_factorize(SpdMatrix(np.eye(2))).logdet == 0.0

    def test_diagonal(self):
        assert spd_factorize(SpdMatrix(np.diag([2.0, 8.0]))).logdet == pytest.approx(np.log(16.0), rel=1e-14)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            spd_factorize(SpdMatrix([[1.0, 2.0], [2.0, 1.0]]))

    def test_zero_matrix_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            spd_factorize(SpdMatrix(np.zeros((3, 3))))

    def test_cached_on_matrix(self):
        a = SpdMatrix(np.diag([1.0, 4.0]))
        assert a.factor() is a.factor()


class TestInverse:
    def test_identity(self):
        assert np.allclose(spd_inverse(SpdMatrix(np.eye(3))).a, np.eye(3))

    def test_diagonal(self):
        inv = spd_inverse(SpdMatrix(np.diag([2.0, 4.0])))
        assert np.allclose(inv.a, np.diag([0.5, 0.25]))

    def test_random_residual(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            a = random_spd(rng, int(rng.integers(2, 9)))
            inv = spd_inverse(a)
            assert np.max(np.abs(a.a @ inv.a - np.eye(a.dim))) <= 1e-12


class TestEigen:
    def test_diagonal_sorted(self):
        vals, vecs = sym_eigen(SpdMatrix(np.diag([3.0, 1.0, 2.0])))
        assert np.allclose(vals, [1.0, 2.0, 3.0])
        assert np.allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])

    def test_identity(self):
        vals, _ = sym_eigen(SpdMatrix(np.eye(4)))
        assert np.allclose(vals, 1.0)

    def test_eigvalues_product_matches_det(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = random_spd(rng, int(rng.integers(2, 9)))
            vals, _ = sym_eigen(a)
            assert np.sum(np.log(vals)) == pytest.approx(spd_factorize(a).logdet, rel=1e-9)

    def test_matches_numpy(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = random_spd(rng, int(rng.integers(2, 9)))
            vals, _ = sym_eigen(a)
            assert np.allclose(vals, np.linalg.eigvalsh(a.a), rtol=1e-10, atol=1e-12)


class TestInvSqrt:
    def test_identity(self):
        assert np.allclose(inv_sqrt_spd(SpdMatrix(np.eye(2))).a, np.eye(2))

    def test_diagonal(self):
        s = inv_sqrt_spd(SpdMatrix(np.diag([4.0, 9.0])))
        assert np.allclose(s.a, np.diag([0.5, 1.0 / 3.0]))

    def test_random_residual(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = random_spd(rng, int(rng.integers(2, 9)))
            s = inv_sqrt_spd(a)
            assert np.max(np.abs(s.a @ a.a @ s.a - np.eye(a.dim))) <= 1e-10


def test_bulk_random_residuals():
    """10^4 seeded SPD matrices, m in 2..8: all residuals inside tolerance."""
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        m = int(rng.integers(2, 9))
        a = random_spd(rng, m)
        factor = spd_factorize(a)
        assert np.max(np.abs(factor.lower @ factor.lower.T - a.a)) <= 1e-12 * np.max(np.abs(a.a))
        inv = spd_inverse(a)
        assert np.max(np.abs(a.a @ inv.a - np.eye(m))) <= 1e-12
        vals, vecs = sym_eigen(a)
        recon = (vecs * vals) @ vecs.T
        assert np.max(np.abs(recon - a.a)) <= 1e-10 * np.max(np.abs(a.a))
        assert vals.sum() == pytest.approx(np.trace(a.a), rel=1e-10)


def test_eigenvalue_interlacing_sanity():
    rng = np.random.default_rng(77)
    for _ in range(200):
        a = random_spd(rng, int(rng.integers(2, 9)))
        vals, _ = sym_eigen(a)
        diag = np.diag(a.a)
        assert vals[0] <= diag.min() + 1e-12
        assert diag.max() <= vals[-1] + 1e-12


def test_symmetrizes_on_construction():
    a = SpdMatrix([[1.0, 0.3], [0.1, 1.0]])
    assert a.a[0, 1] == a.a[1, 0]
