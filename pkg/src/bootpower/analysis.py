"""Hypothesis-test backends applied to each replicate's assembled data.

Each test returns an :class:`AnalysisOutcome`. Degenerate inputs (zero
variance where a t statistic needs one) raise
:class:`~bootpower.errors.DegenerateDataError`; the power engine captures
those into non-converged outcomes so failed replicates are counted
explicitly rather than silently dropped.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats

from .data_model import (
    ARM_CONTROL,
    ARM_INTERVENTION,
    AnalysisOutcome,
    BinaryRecord,
    ContinuousRecord,
    SurvivalRecord,
    TrialDataset,
)
from .errors import DegenerateDataError, DomainError

ANALYSIS_WELCH_T = "welch_t"
ANALYSIS_RANK_SUM = "rank_sum"
ANALYSIS_CLUSTER_DID = "cluster_did"
ANALYSIS_COX_FRAILTY = "cox_frailty"

EXACT_RANK_SUM_LIMIT = 20


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _welch(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float, float]:
    """Welch two-sample t machinery: (estimate, t, df, p).

    estimate = mean(b) - mean(a); the two-sided p-value uses the
    Welch-Satterthwaite degrees of freedom.
    """
    mean_a, mean_b = a.mean(), b.mean()
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    se2 = va + vb
    if se2 == 0.0:
        if mean_a == mean_b:
            raise DegenerateDataError("zero variance in both groups with equal means")
        raise DegenerateDataError("zero variance in both groups (forced separation)")
    df = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    estimate = mean_b - mean_a
    t = estimate / math.sqrt(se2)
    p = 2.0 * stats.t.sf(abs(t), df)
    return estimate, t, df, min(1.0, float(p))


def _student(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float, float]:
    """Pooled-variance two-sample t machinery: (estimate, t, df, p).

    Exactly calibrated at small group sizes under normality, which matters
    when the groups are a handful of cluster summaries.
    """
    na, nb = len(a), len(b)
    pooled = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if pooled == 0.0:
        if a.mean() == b.mean():
            raise DegenerateDataError("zero variance in both groups with equal means")
        raise DegenerateDataError("zero variance in both groups (forced separation)")
    estimate = b.mean() - a.mean()
    df = na + nb - 2
    t = estimate / math.sqrt(pooled * (1.0 / na + 1.0 / nb))
    p = 2.0 * stats.t.sf(abs(t), df)
    return estimate, t, df, min(1.0, float(p))


def welch_t_test(
    group_a: Sequence[float], group_b: Sequence[float], alpha: float
) -> AnalysisOutcome:
    """Two-sided Welch t test; estimate is mean(B) - mean(A)."""
    _check_alpha(alpha)
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DomainError("the Welch t test needs at least 2 values per group")
    estimate, _, _, p = _welch(a, b)
    return AnalysisOutcome.from_p(p, estimate, alpha)


def _exact_rank_sum_p(doubled_ranks: np.ndarray, n1: int, w_doubled: int) -> float:
    """Exact two-sided p for the rank-sum via the permutation distribution.

    Counts size-n1 subsets of the (doubled, hence integer) midranks by sum
    with a subset-sum DP, then doubles the smaller tail.
    """
    total = int(doubled_ranks.sum())
    # counts[k][s] = number of size-k subsets with doubled-rank sum s
    counts = [np.zeros(total + 1, dtype=object) for _ in range(n1 + 1)]
    counts[0][0] = 1
    for r in doubled_ranks:
        r = int(r)
        for k in range(n1, 0, -1):
            shifted = np.zeros(total + 1, dtype=object)
            shifted[r:] = counts[k - 1][: total + 1 - r]
            counts[k] = counts[k] + shifted
    dist = counts[n1]
    n_subsets = int(dist.sum())
    p_low = int(dist[: w_doubled + 1].sum()) / n_subsets
    p_high = int(dist[w_doubled:].sum()) / n_subsets
    return min(1.0, 2.0 * min(p_low, p_high))


def rank_sum_test(
    group_a: Sequence[float], group_b: Sequence[float], alpha: float
) -> AnalysisOutcome:
    """Two-sided Wilcoxon rank-sum test with midranks for ties.

    Exact enumeration of the permutation distribution when the combined
    sample size is at most 20; otherwise a normal approximation with
    tie-corrected variance and continuity correction.
    """
    _check_alpha(alpha)
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise DomainError("the rank-sum test needs at least 1 value per group")
    n1, n2 = len(a), len(b)
    n = n1 + n2
    combined = np.concatenate([a, b])
    ranks = stats.rankdata(combined, method="average")
    w = float(ranks[:n1].sum())
    estimate = float(b.mean() - a.mean())

    if n <= EXACT_RANK_SUM_LIMIT:
        doubled = np.rint(2.0 * ranks).astype(int)
        w_doubled = int(round(2.0 * w))
        p = _exact_rank_sum_p(doubled, n1, w_doubled)
        return AnalysisOutcome.from_p(p, estimate, alpha)

    expected = n1 * (n + 1) / 2.0
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1.0)))
    if variance <= 0.0:
        # every value tied: W equals its expectation by construction
        return AnalysisOutcome.from_p(1.0, estimate, alpha)
    diff = w - expected
    correction = 0.5 * np.sign(diff)
    z = (diff - correction) / math.sqrt(variance)
    p = min(1.0, 2.0 * float(stats.norm.sf(abs(z))))
    return AnalysisOutcome.from_p(p, estimate, alpha)


def _mean_outcome(records: Sequence) -> float:
    first = records[0]
    if isinstance(first, BinaryRecord):
        return sum(rec.outcome for rec in records) / len(records)
    if isinstance(first, SurvivalRecord):
        return sum(rec.event for rec in records) / len(records)
    if isinstance(first, ContinuousRecord):
        return sum(rec.value for rec in records) / len(records)
    raise DomainError(f"no mean outcome defined for {type(first).__name__}")


def cluster_did_test(
    baseline: TrialDataset, intervention: TrialDataset, alpha: float
) -> AnalysisOutcome:
    """Two-stage difference-in-differences test on cluster summaries.

    Stage one reduces each cluster to its mean outcome per period and takes
    the within-cluster change d = intervention - baseline; stage two compares
    the changes across arms with a pooled two-sample t test (the classical
    cluster-summary analysis, exact at small cluster counts). Cluster-level
    baseline differences cancel in d, which is the point of the design.
    """
    _check_alpha(alpha)
    arms = baseline.arm_assignment
    if arms is None or intervention.arm_assignment != arms:
        raise DomainError("both periods must carry the same arm assignment")
    base_means = {c.cluster_id: _mean_outcome(c.subjects) for c in baseline.clusters}
    int_means = {c.cluster_id: _mean_outcome(c.subjects) for c in intervention.clusters}
    if set(base_means) != set(int_means):
        raise DomainError("baseline and intervention periods must share the same clusters")

    control_d = []
    intervention_d = []
    for cid in baseline.cluster_ids:
        d = int_means[cid] - base_means[cid]
        if arms[cid] == ARM_INTERVENTION:
            intervention_d.append(d)
        elif arms[cid] == ARM_CONTROL:
            control_d.append(d)
        else:
            raise DomainError(f"cluster {cid!r} has unknown arm {arms[cid]!r}")
    if len(control_d) < 2 or len(intervention_d) < 2:
        raise DomainError("the cluster DID test needs at least 2 clusters per arm")
    estimate, _, _, p = _student(np.asarray(control_d), np.asarray(intervention_d))
    return AnalysisOutcome.from_p(p, estimate, alpha)


def wald_test(estimate: float, variance: float, alpha: float) -> AnalysisOutcome:
    """One-degree-of-freedom Wald chi-square test of estimate = 0."""
    _check_alpha(alpha)
    if not (variance > 0):
        raise DomainError(f"wald test needs a positive variance, got {variance}")
    statistic = estimate ** 2 / variance
    p = float(stats.chi2.sf(statistic, df=1))
    return AnalysisOutcome.from_p(p, estimate, alpha)
