import math

import numpy as np
import pytest

from doptprune import (
    CandidateSet,
    Design,
    brute_force_exact,
    d_criterion,
    efficiency,
    fig1_disk,
    info_matrix,
    standardize,
    summarize,
    variance_function,
)
from doptprune.designs import CHUNK_SIZE
from doptprune.errors import IndexOutOfRange
from doptprune.linalg import SpdMatrix

E12 = CandidateSet.from_array(np.eye(2))


class TestCandidateSet:
    def test_requires_two_points_and_dims(self):
        with pytest.raises(ValueError):
            CandidateSet.from_array(np.ones((1, 3)))
        with pytest.raises(ValueError):
            CandidateSet.from_array(np.ones((5, 1)))

    def test_gather_bounds(self):
        with pytest.raises(IndexOutOfRange):
            E12.gather([2])

    def test_generator_replay_is_bit_identical(self):
        def chunk(c):
            gen = np.random.Generator(np.random.Philox(key=np.array([9, c], dtype=np.uint64)))
            rows = min(CHUNK_SIZE, 70000 - c * CHUNK_SIZE)
            return gen.standard_normal((rows, 3))

        cands = CandidateSet.from_generator(chunk, 70000, 3, cache=False)
        first = [blk.copy() for _, blk in cands.chunks()]
        second = [blk for _, blk in cands.chunks()]
        assert all(np.array_equal(a, b) for a, b in zip(first, second))
        assert np.array_equal(cands.gather([0, 65536, 69999]),
                              np.vstack([first[0][0], first[1][0], first[1][-1]]))

    def test_transformed_applies_linear_map(self):
        t = np.array([[2.0, 0.0], [0.0, 0.5]])
        mapped = E12.transformed(t)
        assert np.allclose(mapped.toarray(), np.eye(2) @ t)

    def test_subset_keeps_ids(self):
        sub = fig1_disk(10).subset([2, 5])
        assert sub.ids.tolist() == [2, 5]


class TestDesign:
    def test_weight_sum_renormalized_inside_tolerance(self):
        d = Design.approximate([0, 1], [0.5, 0.5 + 5e-10])
        assert d.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_weight_sum_rejected_outside_tolerance(self):
        with pytest.raises(ValueError):
            Design.approximate([0, 1], [0.5, 0.6])

    def test_tiny_weights_dropped_from_support(self):
        d = Design.approximate([0, 1, 2], [0.5, 0.5 - 1e-13, 1e-13])
        assert d.indices.tolist() == [0, 1]

    def test_exact_counts_validated(self):
        with pytest.raises(ValueError):
            Design.exact([0, 1], [1, 1], n=3)
        d = Design.exact([1, 0], [2, 1], n=3)
        assert d.indices.tolist() == [0, 1]
        assert d.counts.tolist() == [1, 2]
        assert np.allclose(d.weights, [1.0 / 3.0, 2.0 / 3.0])


class TestInfoMatrix:
    def test_single_point(self):
        cands = CandidateSet.from_array(np.array([[1.0, 0.0], [0.0, 1.0]]))
        m = info_matrix(cands, Design.approximate([0], [1.0]))
        assert np.allclose(m.a, [[1.0, 0.0], [0.0, 0.0]])

    def test_uniform_on_basis(self):
        m = info_matrix(E12, Design.approximate([0, 1], [0.5, 0.5]))
        assert np.allclose(m.a, 0.5 * np.eye(2))

    def test_scaled_basis_gives_identity(self):
        cands = CandidateSet.from_array(np.array([[math.sqrt(2), 0.0], [0.0, math.sqrt(2)]]))
        m = info_matrix(cands, Design.approximate([0, 1], [0.5, 0.5]))
        assert np.allclose(m.a, np.eye(2))

    def test_affine_in_weights(self):
        rng = np.random.default_rng(8)
        cands = CandidateSet.from_array(rng.standard_normal((6, 3)))
        idx = np.arange(6)
        w1 = rng.dirichlet(np.ones(6))
        w2 = rng.dirichlet(np.ones(6))
        for alpha in (0.25, 0.5, 0.9):
            mix = info_matrix(cands, Design.approximate(idx, alpha * w1 + (1 - alpha) * w2))
            combo = alpha * info_matrix(cands, Design.approximate(idx, w1)).a \
                + (1 - alpha) * info_matrix(cands, Design.approximate(idx, w2)).a
            assert np.max(np.abs(mix.a - combo)) <= 1e-12


class TestVarianceFunction:
    def test_identity_matrix_gives_norms(self):
        cands = CandidateSet.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
        v = variance_function(cands, SpdMatrix(np.eye(2)))
        assert np.allclose(v, [5.0, 25.0])

    def test_scaled_identity(self):
        cands = CandidateSet.from_array(np.array([[1.0, 1.0], [0.0, 1.0]]))
        v = variance_function(cands, SpdMatrix(np.diag([2.0, 2.0])))
        assert v[0] == pytest.approx(1.0, rel=1e-14)


class TestDCriterion:
    def test_identity(self):
        for m in (2, 3, 5):
            assert d_criterion(SpdMatrix(np.eye(m))) == pytest.approx(1.0, rel=1e-14)

    def test_diagonal(self):
        assert d_criterion(SpdMatrix(np.diag([4.0, 1.0]))) == pytest.approx(2.0, rel=1e-14)

    def test_positive_homogeneity(self):
        assert d_criterion(SpdMatrix(3.0 * np.eye(5))) == pytest.approx(3.0, rel=1e-12)

    def test_singular_is_zero(self):
        assert d_criterion(SpdMatrix(np.diag([1.0, 0.0]))) == 0.0


class TestEfficiency:
    def test_equal_matrices(self):
        mstar = info_matrix(E12, Design.approximate([0, 1], [0.5, 0.5]))
        assert efficiency(Design.approximate([0, 1], [0.5, 0.5]), mstar, E12) == pytest.approx(1.0)

    def test_singular_design_is_zero(self):
        mstar = info_matrix(E12, Design.approximate([0, 1], [0.5, 0.5]))
        assert efficiency(Design.approximate([0], [1.0]), mstar, E12) == 0.0

    def test_disk_reference_design(self):
        # 5 + 4 trials on the two axis points of the disk instance: the
        # well-known value sqrt(80)/9, i.e. about 0.994
        cands = fig1_disk(2497)
        design = Design.exact([1, 2], [5, 4], n=9)
        eff = efficiency(design, SpdMatrix(np.eye(2)), cands)
        assert eff == pytest.approx(math.sqrt(80.0) / 9.0, rel=1e-12)
        assert eff == pytest.approx(0.994, abs=1e-3)


class TestStandardize:
    def test_identity_is_noop(self):
        out = standardize(E12, SpdMatrix(np.eye(2)))
        assert np.allclose(out.toarray(), np.eye(2))

    def test_diagonal_example(self):
        cands = CandidateSet.from_array(np.array([[2.0, 1.0], [0.0, 1.0]]))
        out = standardize(cands, SpdMatrix(np.diag([4.0, 1.0])))
        assert np.allclose(out.toarray()[0], [1.0, 1.0])

    def test_norms_match_variance_function(self):
        rng = np.random.default_rng(11)
        cands = CandidateSet.from_array(rng.standard_normal((40, 3)))
        mstar = info_matrix(cands, Design.approximate(np.arange(40), np.full(40, 1 / 40)))
        s = standardize(cands, mstar)
        norms = np.einsum("ij,ij->i", s.toarray(), s.toarray())
        assert np.max(np.abs(norms - variance_function(cands, mstar))) <= 1e-10


def test_summary_consistency():
    m = SpdMatrix(np.diag([2.0, 8.0]))
    s = summarize(m)
    assert s.phi == pytest.approx(np.exp(s.logdet / 2), rel=1e-12)


def test_optimal_set_invariant_under_preconditioning():
    """A nonsingular linear map of all regressors scales every design's
    determinant equally, so the set of optimal exact designs is unchanged."""
    rng = np.random.default_rng(13)
    vectors = rng.standard_normal((6, 2))
    t = rng.standard_normal((2, 2)) + 2.0 * np.eye(2)
    before = brute_force_exact(CandidateSet.from_array(vectors), 3)
    after = brute_force_exact(CandidateSet.from_array(vectors @ t), 3)
    key = lambda d: (tuple(d.indices.tolist()), tuple(d.counts.tolist()))
    assert {key(d) for d in before.optimal_designs} == {key(d) for d in after.optimal_designs}
    assert np.array_equal(before.sstar_n, after.sstar_n)
