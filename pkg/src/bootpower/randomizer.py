"""Cluster-to-arm randomization strategies.

Randomization runs inside each replicate, after the baseline bootstrap, so
the assignment can depend on features of the resampled baseline data (size
and event rate). Two strategies: a balanced simple randomization, and the
matched-pairs scheme that stratifies by cluster size, ranks by baseline
event rate within strata, and splits each adjacent pair across arms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import (
    ARM_CONTROL,
    ARM_INTERVENTION,
    BinaryRecord,
    SurvivalRecord,
    TrialDataset,
)
from .errors import DomainError

RANDOMIZER_SIMPLE = "simple"
RANDOMIZER_MATCHED_PAIRS = "matched_pairs"

STRATUM_SIZE = 4


@dataclass(frozen=True)
class ClusterSummary:
    """Baseline features a randomizer may match on."""

    cluster_id: str
    size: int
    baseline_rate: float

    def __post_init__(self) -> None:
        if self.size < 1:
            raise DomainError(f"cluster {self.cluster_id!r}: size must be >= 1")
        if not (0.0 <= self.baseline_rate <= 1.0):
            raise DomainError(f"cluster {self.cluster_id!r}: baseline_rate must lie in [0, 1]")


def summarize_clusters(dataset: TrialDataset) -> list[ClusterSummary]:
    """Per-cluster size and event proportion of a (bootstrapped) baseline.

    For survival data the rate is the proportion of subjects with an observed
    event, i.e. 1 - the censored proportion; matching on one is the same as
    matching on the other. For binary data it is the outcome proportion.
    """
    summaries = []
    for cluster in dataset.clusters:
        first = cluster.subjects[0]
        if isinstance(first, SurvivalRecord):
            rate = sum(rec.event for rec in cluster.subjects) / cluster.size
        elif isinstance(first, BinaryRecord):
            rate = sum(rec.outcome for rec in cluster.subjects) / cluster.size
        else:
            raise DomainError("cluster summaries require binary or survival records")
        summaries.append(ClusterSummary(cluster.cluster_id, cluster.size, rate))
    return summaries


def randomize_simple(cluster_ids: list[str], rng: np.random.Generator) -> dict[str, str]:
    """Assign arms uniformly over balanced assignments (|diff| <= 1)."""
    n = len(cluster_ids)
    if n < 2:
        raise DomainError(f"randomization requires >= 2 clusters, got {n}")
    order = rng.permutation(n)
    n_intervention = n // 2
    if n % 2 == 1 and rng.random() < 0.5:
        n_intervention += 1
    assignment = {}
    for rank, idx in enumerate(order):
        arm = ARM_INTERVENTION if rank < n_intervention else ARM_CONTROL
        assignment[cluster_ids[idx]] = arm
    return assignment


def randomize_matched_pairs(
    summaries: list[ClusterSummary], rng: np.random.Generator
) -> dict[str, str]:
    """Stratify by size, pair by baseline rate, split each pair across arms.

    Clusters are sorted by size ascending and cut into consecutive strata of
    4; within each stratum they are re-sorted by baseline rate and paired
    consecutively. A fair coin orients each pair. Ties break by cluster_id so
    the assignment is a pure function of (summaries, seed). Cluster counts
    not divisible by 4 leave a short trailing stratum; an odd count leaves
    one unpaired cluster, assigned by an independent coin.
    """
    n = len(summaries)
    if n < 2:
        raise DomainError(f"randomization requires >= 2 clusters, got {n}")
    by_size = sorted(summaries, key=lambda s: (s.size, s.cluster_id))
    assignment: dict[str, str] = {}
    for start in range(0, n, STRATUM_SIZE):
        stratum = sorted(
            by_size[start : start + STRATUM_SIZE],
            key=lambda s: (s.baseline_rate, s.cluster_id),
        )
        for pair_start in range(0, len(stratum) - 1, 2):
            first, second = stratum[pair_start], stratum[pair_start + 1]
            if rng.random() < 0.5:
                assignment[first.cluster_id] = ARM_INTERVENTION
                assignment[second.cluster_id] = ARM_CONTROL
            else:
                assignment[first.cluster_id] = ARM_CONTROL
                assignment[second.cluster_id] = ARM_INTERVENTION
        if len(stratum) % 2 == 1:
            leftover = stratum[-1]
            arm = ARM_INTERVENTION if rng.random() < 0.5 else ARM_CONTROL
            assignment[leftover.cluster_id] = arm
    return assignment
