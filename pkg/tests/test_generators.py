import math

import numpy as np
import pytest

from doptprune import InstanceSpec, fig1_disk, gaussian_instance, mixture_grid
from doptprune.generators import MIXTURE_BOUNDS_PCT


def naive_mixture_count(decimals):
    """Triple-loop oracle over the full integer cube with feasibility checks."""
    unit = 10**decimals
    (a_lo, a_hi), (b_lo, b_hi), (c_lo, c_hi) = (
        (lo * unit // 100, hi * unit // 100) for lo, hi in MIXTURE_BOUNDS_PCT
    )
    points = []
    for a in range(a_lo, a_hi + 1):
        for b in range(b_lo, b_hi + 1):
            c = unit - a - b
            if c_lo <= c <= c_hi:
                points.append((a, b, c))
    return points


class TestMixtureGrid:
    def test_count_two_decimals_vs_oracle(self):
        oracle = naive_mixture_count(2)
        assert len(oracle) == 118
        cands = mixture_grid(2)
        assert cands.N == 118
        scaled = np.rint(cands.points * 100).astype(int)
        assert sorted(map(tuple, scaled)) == sorted(oracle)

    def test_count_three_decimals(self):
        assert mixture_grid(3).N == 9991

    def test_feasibility_in_scaled_integers(self):
        cands = mixture_grid(3)
        scaled = np.rint(cands.points * 1000).astype(np.int64)
        assert np.max(np.abs(cands.points * 1000 - scaled)) < 1e-9
        assert np.all(scaled.sum(axis=1) == 1000)
        for j, (lo, hi) in enumerate(MIXTURE_BOUNDS_PCT):
            assert np.all(scaled[:, j] >= lo * 10)
            assert np.all(scaled[:, j] <= hi * 10)

    def test_lexicographic_order(self):
        pts = mixture_grid(2).points
        keys = list(map(tuple, np.rint(pts[:, :2] * 100).astype(int)))
        assert keys == sorted(keys)

    def test_regressor_structure(self):
        cands = mixture_grid(2)
        x = cands.points
        f = cands.toarray()
        assert cands.m == 6
        assert np.allclose(f[:, :3], x)
        assert np.allclose(f[:, 3], x[:, 0] * x[:, 1])
        assert np.allclose(f[:, 4], x[:, 0] * x[:, 2])
        assert np.allclose(f[:, 5], x[:, 1] * x[:, 2])

    def test_rejects_coarse_grid(self):
        with pytest.raises(ValueError):
            mixture_grid(1)


class TestGaussianInstance:
    def test_sample_mean_near_zero(self):
        cands = gaussian_instance(10**4, 5, seed=1)
        means = cands.toarray().mean(axis=0)
        assert np.all(np.abs(means) <= 4.0 / math.sqrt(10**4))

    def test_same_seed_bit_identical(self):
        a = gaussian_instance(70000, 3, seed=9, cache=False)
        b = gaussian_instance(70000, 3, seed=9, cache=False)
        for (_, blk_a), (_, blk_b) in zip(a.chunks(), b.chunks()):
            assert np.array_equal(blk_a, blk_b)

    def test_different_seeds_differ(self):
        a = gaussian_instance(100, 3, seed=1).toarray()
        b = gaussian_instance(100, 3, seed=2).toarray()
        assert not np.array_equal(a, b)

    def test_chunks_regenerate_independently(self):
        cands = gaussian_instance(2 * 65536 + 17, 2, seed=5, cache=False)
        # ask for the last chunk alone, then compare with a full pass
        tail = cands.gather([2 * 65536 + 3])
        full = cands.toarray()
        assert np.array_equal(tail[0], full[2 * 65536 + 3])

    def test_subsample_covariance_close_to_identity(self):
        cands = gaussian_instance(10**5, 4, seed=3)
        sample = cands.toarray()
        cov = sample.T @ sample / sample.shape[0]
        assert np.max(np.abs(cov - np.eye(4))) <= 0.05


class TestDiskInstance:
    def test_all_points_inside_radius(self):
        pts = fig1_disk(2497).toarray()
        assert np.all(np.linalg.norm(pts, axis=1) <= math.sqrt(2.0) + 1e-12)

    def test_total_count(self):
        assert fig1_disk(2497).N == 2500

    def test_first_three_fixed_points(self):
        pts = fig1_disk(5).toarray()
        assert np.allclose(pts[0], [1.0, 0.0])
        assert np.allclose(pts[1], [math.sqrt(2.0), 0.0])
        assert np.allclose(pts[2], [0.0, math.sqrt(2.0)])


class TestInstanceSpec:
    def test_round_trip(self):
        spec = InstanceSpec("gaussian", {"N": 100, "m": 3, "seed": 4}, n=10)
        again = InstanceSpec.from_dict(spec.to_dict())
        assert again.kind == "gaussian"
        assert again.params == {"N": 100, "m": 3, "seed": 4}
        assert again.n == 10

    def test_build_dispatch(self):
        assert InstanceSpec("mixture", {"decimals": 2}).build().N == 118
        assert InstanceSpec("fig1_disk", {"J": 7}).build().N == 10
        assert InstanceSpec("gaussian", {"N": 50, "m": 2, "seed": 0}).build().N == 50

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            InstanceSpec("cube", {}).build()
