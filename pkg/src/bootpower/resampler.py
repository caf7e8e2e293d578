"""Bootstrap sampling with replacement.

Two flavors: simple (ungrouped) resampling for lab-style designs, and
within-cluster resampling for cluster-randomized designs. Within-cluster
draws never cross cluster boundaries, so the within-cluster correlation and
the observed distribution of cluster sizes survive resampling. A rate above
1 oversamples each cluster, which is how a short observation window is
stretched to a longer planned accrual period.
"""
from __future__ import annotations

import math
from typing import Sequence, TypeVar

import numpy as np

from .data_model import ClusterData, TrialDataset
from .errors import DomainError
from .streams import Stream

T = TypeVar("T")


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero toward +inf."""
    return int(math.floor(x + 0.5))


def bootstrap_simple(values: Sequence[T], n_out: int, rng: np.random.Generator) -> list[T]:
    """Draw ``n_out`` items independently and uniformly, with replacement."""
    if not values:
        raise DomainError("cannot resample from an empty collection")
    if n_out < 1:
        raise DomainError(f"n_out must be >= 1, got {n_out}")
    idx = rng.integers(0, len(values), size=n_out)
    return [values[i] for i in idx]


def bootstrap_within_cluster(dataset: TrialDataset, rate: float, stream: Stream) -> TrialDataset:
    """Resample every cluster independently at the given oversampling rate.

    Cluster C of size n_C contributes round_half_up(rate * n_C) subjects,
    each drawn uniformly from C's own subjects. Each cluster consumes its own
    sub-stream keyed by cluster position, so per-cluster output is invariant
    to execution order.
    """
    if not (rate > 0):
        raise DomainError(f"sampling rate must be > 0, got {rate}")
    out: list[ClusterData] = []
    for position, cluster in enumerate(dataset.clusters):
        if not cluster.subjects:
            raise DomainError(f"cluster {cluster.cluster_id!r} is empty")
        n_out = round_half_up(rate * cluster.size)
        rng = stream.child(position).generator()
        idx = rng.integers(0, cluster.size, size=n_out)
        out.append(ClusterData(cluster.cluster_id, tuple(cluster.subjects[i] for i in idx)))
    return TrialDataset(tuple(out), dataset.period, dataset.arm_assignment)
