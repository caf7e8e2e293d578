import numpy as np
import pytest

from bootpower.data_model import (
    BinaryRecord,
    ClusterData,
    ContinuousRecord,
    SurvivalRecord,
    TrialDataset,
)


def make_survival_cluster(cluster_id, times, events, offset=2.0, covariates=()):
    subjects = []
    for t, e in zip(times, events):
        subjects.append(
            SurvivalRecord(
                cluster_id=cluster_id,
                time=float(t),
                event=int(e),
                discharge_time=float(t + offset) if e else float(t),
                covariates=tuple(covariates),
            )
        )
    return ClusterData(cluster_id, tuple(subjects))


@pytest.fixture
def survival_dataset():
    """Two small well-formed survival clusters."""
    rng = np.random.default_rng(11)
    clusters = []
    for cid, n in (("a", 10), ("b", 14)):
        times = rng.exponential(5.0, n) + 0.1
        events = rng.random(n) < 0.4
        clusters.append(make_survival_cluster(cid, times, events))
    return TrialDataset(tuple(clusters))


@pytest.fixture
def binary_dataset():
    """Eight binary clusters of 50 subjects with ~30% outcome rate."""
    rng = np.random.default_rng(5)
    clusters = []
    for c in range(8):
        cid = f"c{c + 1}"
        outcomes = (rng.random(50) < 0.3).astype(int)
        subjects = tuple(BinaryRecord(cid, int(o)) for o in outcomes)
        clusters.append(ClusterData(cid, subjects))
    return TrialDataset(tuple(clusters))


@pytest.fixture
def lab_records():
    """Two continuous groups of 30 values each."""
    rng = np.random.default_rng(9)
    group_a = [ContinuousRecord("A", float(v)) for v in rng.normal(10.0, 2.0, 30)]
    group_b = [ContinuousRecord("B", float(v)) for v in rng.normal(10.0, 2.0, 30)]
    return group_a + group_b


@pytest.fixture
def null_lab_records():
    """Lab fixture whose empirical group populations are identical.

    Face-validity checks need the null to be exactly true in the bootstrap
    world: both conditions must resample the same observed values. (With two
    independent pilot samples the observed means differ, and the bootstrap
    faithfully treats that difference as real.)
    """
    rng = np.random.default_rng(9)
    values = rng.normal(10.0, 2.0, 30)
    group_a = [ContinuousRecord("A", float(v)) for v in values]
    group_b = [ContinuousRecord("B", float(v)) for v in values]
    return group_a + group_b
