import numpy as np
import pytest
from numpy.testing import assert_allclose

from bootpower.errors import DomainError
from bootpower.stats_util import clopper_pearson, design_effect, effective_sample_size


class TestDesignEffect:
    def test_published_icc_example(self):
        assert_allclose(design_effect(1000, 0.001), 1.999)

    def test_zero_icc_gives_one(self):
        assert design_effect(500, 0.0) == 1.0

    def test_singleton_clusters_give_one(self):
        assert design_effect(1, 0.7) == 1.0

    def test_accepts_non_integer_cluster_size(self):
        assert_allclose(design_effect(12.5, 0.1), 2.15)

    @pytest.mark.parametrize("m,rho", [(0.5, 0.1), (10, -0.01), (10, 1.01)])
    def test_domain_errors(self, m, rho):
        with pytest.raises(DomainError):
            design_effect(m, rho)


class TestEffectiveSampleSize:
    def test_hand_arithmetic(self):
        assert_allclose(effective_sample_size(10000, 1000, 0.001), 5002.50, atol=0.005)
        assert_allclose(effective_sample_size(10000, 1000, 0.002), 3335.56, atol=0.005)

    def test_doubling_tiny_icc_loses_a_third(self):
        ratio = effective_sample_size(10000, 1000, 0.001) / effective_sample_size(
            10000, 1000, 0.002
        )
        # exact value is 2.998/1.999; the quoted 1.49975 is that, rounded
        assert_allclose(ratio, 2.998 / 1.999, rtol=1e-12)
        assert_allclose(ratio, 1.49975, atol=1e-5)
        assert_allclose(1 - 1 / ratio, 1 / 3, atol=2e-4)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            effective_sample_size(0, 10, 0.1)


class TestClopperPearson:
    def test_matches_published_exact_limits(self):
        ci = clopper_pearson(89, 100, 0.95)
        assert_allclose(ci.low, 0.8117, atol=1e-4)
        assert_allclose(ci.high, 0.9438, atol=1e-4)

    def test_published_three_decimal_case(self):
        ci = clopper_pearson(56, 1000, 0.95)
        assert round(ci.low, 3) == 0.043
        assert round(ci.high, 3) == 0.072

    def test_boundaries(self):
        assert clopper_pearson(0, 40).low == 0.0
        assert clopper_pearson(40, 40).high == 1.0

    @pytest.mark.parametrize("k,n", [(0, 1), (1, 1), (3, 10), (50, 100), (999, 1000)])
    def test_interval_contains_point_estimate(self, k, n):
        ci = clopper_pearson(k, n, 0.95)
        assert ci.low <= k / n <= ci.high

    def test_monotone_in_successes(self):
        n = 60
        lows = [clopper_pearson(k, n).low for k in range(n + 1)]
        highs = [clopper_pearson(k, n).high for k in range(n + 1)]
        assert all(a <= b for a, b in zip(lows, lows[1:]))
        assert all(a <= b for a, b in zip(highs, highs[1:]))

    def test_coverage_at_nominal_level(self):
        # 10,000 simulated binomial draws at p = 0.05, n = 1000; the 95%
        # interval must cover p in >= 94% of draws
        rng = np.random.default_rng(20230817)
        p, n = 0.05, 1000
        draws = rng.binomial(n, p, size=10_000)
        covered = 0
        for k in np.unique(draws):
            ci = clopper_pearson(int(k), n, 0.95)
            if ci.contains(p):
                covered += int((draws == k).sum())
        assert covered / 10_000 >= 0.94

    @pytest.mark.parametrize("k,n,level", [(-1, 10, 0.95), (11, 10, 0.95), (5, 10, 1.0), (5, 0, 0.95)])
    def test_domain_errors(self, k, n, level):
        with pytest.raises(DomainError):
            clopper_pearson(k, n, level)
