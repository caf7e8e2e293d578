import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bootpower.analysis import (
    cluster_did_test,
    rank_sum_test,
    wald_test,
    welch_t_test,
)
from bootpower.data_model import BinaryRecord, ClusterData, TrialDataset
from bootpower.errors import DegenerateDataError, DomainError

# two-sided p-values frozen from direct quadrature of the t/chi-square
# densities (independent of the scipy calls inside the implementation)
WELCH_SHIFTED_P = 0.3465935          # {1..5} vs {2..6}: t = -1, df = 8
DID_EXAMPLE_P = 0.0213116            # d-values {0.1,-0.1,0.0} vs {0.3,0.2,0.4}
CHI2_1_TAIL_AT_3_8415 = 0.0500
CHI2_1_TAIL_AT_4 = 0.045500


class TestWelch:
    def test_identical_groups(self):
        out = welch_t_test([1, 2, 3], [1, 2, 3], 0.05)
        assert out.p_value == 1.0
        assert out.estimate == 0.0
        assert not out.reject

    def test_shifted_groups_match_oracle(self):
        out = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], 0.05)
        assert_allclose(out.p_value, WELCH_SHIFTED_P, atol=1e-6)
        assert out.estimate == 1.0

    def test_zero_variance_both_groups_is_degenerate(self):
        with pytest.raises(DegenerateDataError):
            welch_t_test([0, 0, 0], [0, 0, 0], 0.05)
        with pytest.raises(DegenerateDataError):
            welch_t_test([1, 1], [2, 2], 0.05)

    def test_small_groups_rejected(self):
        with pytest.raises(DomainError):
            welch_t_test([1], [1, 2], 0.05)

    def test_antisymmetry(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(0, 1, 12), rng.normal(0.8, 2, 9)
        ab = welch_t_test(a, b, 0.05)
        ba = welch_t_test(b, a, 0.05)
        assert ab.p_value == ba.p_value
        assert ab.estimate == -ba.estimate

    def test_alpha_threshold(self):
        rng = np.random.default_rng(4)
        a, b = rng.normal(0, 1, 40), rng.normal(1.2, 1, 40)
        out = welch_t_test(a, b, 0.05)
        assert out.reject == (out.p_value < 0.05)


class TestRankSum:
    def test_no_overlap_exact(self):
        out = rank_sum_test([1, 2, 3], [4, 5, 6], 0.05)
        assert_allclose(out.p_value, 0.1)

    def test_single_values_exact(self):
        assert rank_sum_test([1], [2], 0.05).p_value == 1.0

    def test_identical_groups(self):
        assert rank_sum_test([1, 2, 3], [1, 2, 3], 0.05).p_value == 1.0

    def test_exact_against_full_enumeration(self):
        # brute-force the permutation distribution with itertools
        a = [3.0, 9.0, 1.0, 7.0]
        b = [4.0, 12.0, 15.0]
        combined = np.array(a + b)
        order = combined.argsort()
        ranks = np.empty(len(combined))
        ranks[order] = np.arange(1, len(combined) + 1)
        observed = ranks[: len(a)].sum()
        sums = [sum(c) for c in itertools.combinations(ranks, len(a))]
        p_low = sum(s <= observed for s in sums) / len(sums)
        p_high = sum(s >= observed for s in sums) / len(sums)
        expected = min(1.0, 2.0 * min(p_low, p_high))
        out = rank_sum_test(a, b, 0.05)
        assert_allclose(out.p_value, expected)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(0, 1, 8), rng.normal(0.5, 1, 9)
        p_raw = rank_sum_test(a, b, 0.05).p_value
        p_exp = rank_sum_test(np.exp(a), np.exp(b), 0.05).p_value
        p_cub = rank_sum_test(a ** 3, b ** 3, 0.05).p_value
        assert p_raw == p_exp == p_cub

    def test_large_sample_invariance_and_agreement(self):
        rng = np.random.default_rng(6)
        a, b = rng.normal(0, 1, 30), rng.normal(0.6, 1, 25)
        p_raw = rank_sum_test(a, b, 0.05).p_value
        p_mono = rank_sum_test(np.tanh(a), np.tanh(b), 0.05).p_value
        assert p_raw == p_mono

    def test_empty_group_rejected(self):
        with pytest.raises(DomainError):
            rank_sum_test([], [1.0], 0.05)


def did_dataset(cluster_means, arms, n_per_cluster=4):
    """Binary clusters whose outcome proportions equal the given means."""
    clusters = []
    for cid, mean in cluster_means.items():
        k = round(mean * n_per_cluster)
        outcomes = [1] * k + [0] * (n_per_cluster - k)
        clusters.append(ClusterData(cid, tuple(BinaryRecord(cid, o) for o in outcomes)))
    return TrialDataset(tuple(clusters), arm_assignment=dict(arms))


class TestClusterDid:
    ARMS = {"c1": "control", "c2": "control", "c3": "control",
            "i1": "intervention", "i2": "intervention", "i3": "intervention"}

    def test_matches_hand_computed_example(self):
        # cluster changes: control {0.1, -0.1, 0.0}, intervention {0.3, 0.2, 0.4}
        base = did_dataset(
            {"c1": 0.2, "c2": 0.4, "c3": 0.3, "i1": 0.1, "i2": 0.3, "i3": 0.2},
            self.ARMS, n_per_cluster=10,
        )
        intervention = did_dataset(
            {"c1": 0.3, "c2": 0.3, "c3": 0.3, "i1": 0.4, "i2": 0.5, "i3": 0.6},
            self.ARMS, n_per_cluster=10,
        ).with_period("intervention")
        out = cluster_did_test(base, intervention, 0.05)
        assert_allclose(out.estimate, 0.3, atol=1e-12)
        assert_allclose(out.p_value, DID_EXAMPLE_P, atol=1e-6)
        assert out.reject

    def test_identical_changes_everywhere_are_degenerate(self):
        # binary-exact eighths keep the within-cluster changes exactly equal
        means = {"c1": 0.25, "c2": 0.5, "c3": 0.125, "i1": 0.375, "i2": 0.25, "i3": 0.5}
        base = did_dataset(means, self.ARMS, n_per_cluster=8)
        shifted = {cid: m + 0.25 for cid, m in means.items()}
        intervention = did_dataset(shifted, self.ARMS, n_per_cluster=8).with_period("intervention")
        # every cluster moves by the same amount: zero variance in both arms
        with pytest.raises(DegenerateDataError):
            cluster_did_test(base, intervention, 0.05)

    def test_forced_separation_is_degenerate(self):
        arms = {"c1": "control", "c2": "control", "i1": "intervention", "i2": "intervention"}
        base = did_dataset({"c1": 0.2, "c2": 0.2, "i1": 0.2, "i2": 0.2}, arms, 10)
        intervention = did_dataset(
            {"c1": 0.2, "c2": 0.2, "i1": 0.7, "i2": 0.7}, arms, 10
        ).with_period("intervention")
        with pytest.raises(DegenerateDataError):
            cluster_did_test(base, intervention, 0.05)

    def test_period_constant_cancels(self):
        base = did_dataset(
            {"c1": 0.20, "c2": 0.35, "c3": 0.25, "i1": 0.30, "i2": 0.15, "i3": 0.40},
            self.ARMS, n_per_cluster=20,
        )
        int_means = {"c1": 0.30, "c2": 0.40, "c3": 0.35, "i1": 0.55, "i2": 0.45, "i3": 0.60}
        intervention = did_dataset(int_means, self.ARMS, n_per_cluster=20).with_period("intervention")
        out1 = cluster_did_test(base, intervention, 0.05)

        # add a constant to every intervention-period outcome: the period
        # effect differences out, so estimate and p-value are unchanged
        lifted = {cid: m + 0.2 for cid, m in int_means.items()}
        intervention2 = did_dataset(lifted, self.ARMS, n_per_cluster=20).with_period("intervention")
        out2 = cluster_did_test(base, intervention2, 0.05)
        assert_allclose(out1.p_value, out2.p_value, atol=1e-12)
        assert_allclose(out1.estimate, out2.estimate, atol=1e-12)

    def test_arm_with_one_cluster_rejected(self):
        arms = {"c1": "control", "i1": "intervention", "i2": "intervention"}
        base = did_dataset({"c1": 0.2, "i1": 0.3, "i2": 0.4}, arms, 10)
        intervention = did_dataset({"c1": 0.3, "i1": 0.2, "i2": 0.6}, arms, 10).with_period(
            "intervention"
        )
        with pytest.raises(DomainError):
            cluster_did_test(base, intervention, 0.05)

    def test_mismatched_assignments_rejected(self):
        base = did_dataset({"c1": 0.2, "c2": 0.3, "i1": 0.3, "i2": 0.1}, {
            "c1": "control", "c2": "control", "i1": "intervention", "i2": "intervention"}, 10)
        intervention = did_dataset({"c1": 0.2, "c2": 0.3, "i1": 0.3, "i2": 0.1}, {
            "c1": "intervention", "c2": "control", "i1": "control", "i2": "intervention"},
            10).with_period("intervention")
        with pytest.raises(DomainError):
            cluster_did_test(base, intervention, 0.05)


class TestWald:
    def test_zero_estimate(self):
        assert wald_test(0.0, 2.0, 0.05).p_value == 1.0

    def test_critical_value(self):
        out = wald_test(1.0, 1.0 / 3.8415, 0.05)
        assert_allclose(out.p_value, CHI2_1_TAIL_AT_3_8415, atol=1e-4)

    def test_normal_square_equivalence(self):
        out = wald_test(1.96, 1.0, 0.05)
        assert_allclose(out.p_value, 0.05, atol=1e-3)
        out2 = wald_test(2.0, 1.0, 0.05)
        assert_allclose(out2.p_value, CHI2_1_TAIL_AT_4, atol=1e-6)

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(DomainError):
            wald_test(1.0, 0.0, 0.05)
