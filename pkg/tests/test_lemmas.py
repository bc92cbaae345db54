"""Randomized bound and identity suites at their full trial counts, plus
shape checks of the one-hump bracket function."""

import numpy as np
import pytest

import lemma_suites as suites
from lemma_suites import r_value


@pytest.mark.parametrize("suite", suites.ALL_SUITES, ids=lambda f: f.__name__)
def test_suite(suite):
    suite()


class TestBracketFunctionShape:
    @pytest.mark.parametrize("m,k,t", [(2, 1, 2.2), (3, 2, 4.0), (6, 2, 7.5), (5, 4, 3.3)])
    def test_endpoints_and_peak(self, m, k, t):
        assert r_value(k, t, np.array([0.0]), m)[0] == 0.0
        assert r_value(k, t, np.array([t / k]), m)[0] == pytest.approx(0.0, abs=1e-12)
        assert r_value(k, t, np.array([t / m]), m)[0] == pytest.approx(t / m, rel=1e-12)

    @pytest.mark.parametrize("m,k,t", [(2, 1, 2.2), (3, 2, 4.0), (6, 2, 7.5)])
    def test_monotone_segments(self, m, k, t):
        rising = np.linspace(0.0, t / m, 1000)
        falling = np.linspace(t / m, t / k, 1000)
        assert np.all(np.diff(r_value(k, t, rising, m)) > -1e-14)
        assert np.all(np.diff(r_value(k, t, falling, m)) < 1e-14)

    @pytest.mark.parametrize("m,k,t", [(2, 1, 2.2), (3, 2, 4.0), (6, 2, 7.5)])
    def test_midpoint_concavity_sampled(self, m, k, t):
        rng = np.random.default_rng(99)
        a = rng.uniform(0.0, t / k, 500)
        b = rng.uniform(0.0, t / k, 500)
        mid = r_value(k, t, 0.5 * (a + b), m)
        chord = 0.5 * (r_value(k, t, a, m) + r_value(k, t, b, m))
        assert np.all(mid >= chord - 1e-12)
