"""Shared domain types: subject records, clustered datasets, effect
specifications, and result containers.

Everything here is immutable after construction (frozen dataclasses holding
tuples), so instances can be shared read-only across concurrent replicate
workers. Record-level invariants are *reported* by :func:`validate_dataset`
rather than enforced in constructors: a malformed input file is data to
describe, not a crash.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import DomainError

PERIOD_BASELINE = "baseline"
PERIOD_INTERVENTION = "intervention"
ARM_CONTROL = "control"
ARM_INTERVENTION = "intervention"

PERIODS = (PERIOD_BASELINE, PERIOD_INTERVENTION)
ARMS = (ARM_CONTROL, ARM_INTERVENTION)


@dataclass(frozen=True)
class ContinuousRecord:
    """One measured value from a (non-clustered) lab-style experiment."""

    group: str
    value: float


@dataclass(frozen=True)
class BinaryRecord:
    """One subject's 0/1 outcome within a cluster."""

    cluster_id: str
    outcome: int


@dataclass(frozen=True)
class SurvivalRecord:
    """One subject's follow-up within a cluster.

    ``time`` is follow-up until the event (``event == 1``) or censoring
    (``event == 0``). ``discharge_time`` is the time the subject actually
    left follow-up after an observed event; for censored subjects it is
    stored equal to ``time`` (or omitted). ``covariates`` is an ordered
    tuple of (name, value) pairs.
    """

    cluster_id: str
    time: float
    event: int
    discharge_time: Optional[float] = None
    covariates: tuple[tuple[str, float], ...] = ()

    def covariate(self, name: str) -> float:
        for key, value in self.covariates:
            if key == name:
                return value
        raise KeyError(name)


Record = Union[ContinuousRecord, BinaryRecord, SurvivalRecord]


@dataclass(frozen=True)
class ClusterData:
    """All subjects observed at one cluster, homogeneous in record kind."""

    cluster_id: str
    subjects: tuple[Record, ...]

    @property
    def size(self) -> int:
        return len(self.subjects)


@dataclass(frozen=True)
class TrialDataset:
    """Clusters of subject records for one observation period.

    ``arm_assignment`` maps cluster_id to ``control``/``intervention`` and is
    absent until a randomizer has run. Cluster order is meaningful (file
    order) and preserved by every operation in this package.
    """

    clusters: tuple[ClusterData, ...]
    period: str = PERIOD_BASELINE
    arm_assignment: Optional[Mapping[str, str]] = None

    @property
    def cluster_ids(self) -> tuple[str, ...]:
        return tuple(c.cluster_id for c in self.clusters)

    @property
    def n_subjects(self) -> int:
        return sum(c.size for c in self.clusters)

    def with_arms(self, arms: Mapping[str, str]) -> "TrialDataset":
        return TrialDataset(self.clusters, self.period, dict(arms))

    def with_period(self, period: str) -> "TrialDataset":
        return TrialDataset(self.clusters, period, self.arm_assignment)


# --- Effect specifications -------------------------------------------------

ODDS_RESET = "reset"
ODDS_ADDITIVE = "additive"
MODE_DISCHARGE_SUBSTITUTION = "discharge_substitution"
MODE_CENSOR_AT_EVENT = "censor_at_event"
SELECT_BERNOULLI = "bernoulli"
SELECT_EXACT_COUNT = "exact_count"


@dataclass(frozen=True)
class Shift:
    """Alternative hypothesis: add ``delta`` (outcome units) to every value."""

    delta: float


@dataclass(frozen=True)
class OddsMultiplier:
    """Alternative hypothesis: multiply each cluster's outcome odds by
    ``theta``. The ``reset`` variant redraws every outcome at the implied
    probability; ``additive`` keeps observed 1s and only flips 0s up."""

    theta: float
    variant: str = ODDS_RESET

    def __post_init__(self) -> None:
        if not (self.theta > 0):
            raise DomainError(f"odds multiplier theta must be > 0, got {self.theta}")
        if self.variant not in (ODDS_RESET, ODDS_ADDITIVE):
            raise DomainError(f"unknown odds variant {self.variant!r}")


@dataclass(frozen=True)
class EventRemoval:
    """Alternative hypothesis: turn a fraction of observed events into
    censorings. ``discharge_substitution`` replaces the event time with the
    post-event discharge time; ``censor_at_event`` keeps the time."""

    fraction: float
    mode: str = MODE_DISCHARGE_SUBSTITUTION
    selection: str = SELECT_BERNOULLI

    def __post_init__(self) -> None:
        if not (0.0 <= self.fraction <= 1.0):
            raise DomainError(f"removal fraction must be in [0, 1], got {self.fraction}")
        if self.mode not in (MODE_DISCHARGE_SUBSTITUTION, MODE_CENSOR_AT_EVENT):
            raise DomainError(f"unknown removal mode {self.mode!r}")
        if self.selection not in (SELECT_BERNOULLI, SELECT_EXACT_COUNT):
            raise DomainError(f"unknown selection rule {self.selection!r}")


EffectSpec = Union[Shift, OddsMultiplier, EventRemoval]


# --- Result containers -----------------------------------------------------

@dataclass(frozen=True)
class AnalysisOutcome:
    """Outcome of one replicate's fitted analysis."""

    p_value: float
    reject: bool
    estimate: float
    converged: bool
    detail: str = ""

    @staticmethod
    def from_p(p_value: float, estimate: float, alpha: float, detail: str = "") -> "AnalysisOutcome":
        return AnalysisOutcome(
            p_value=float(p_value),
            reject=bool(p_value < alpha),
            estimate=float(estimate),
            converged=True,
            detail=detail,
        )

    @staticmethod
    def failed(detail: str) -> "AnalysisOutcome":
        if not detail:
            raise DomainError("a non-converged outcome must carry a detail message")
        return AnalysisOutcome(p_value=1.0, reject=False, estimate=math.nan, converged=False, detail=detail)


@dataclass(frozen=True)
class PowerEstimate:
    """Rejection proportion with exact binomial confidence limits."""

    n_reps: int
    n_reject: int
    n_failed: int
    power: float
    ci_low: float
    ci_high: float
    alpha: float
    master_seed: int

    def __post_init__(self) -> None:
        if not (0 <= self.n_reject <= self.n_reps):
            raise DomainError("n_reject must lie in [0, n_reps]")
        if not (0 <= self.n_failed <= self.n_reps):
            raise DomainError("n_failed must lie in [0, n_reps]")
        if not (self.ci_low <= self.power <= self.ci_high):
            raise DomainError("confidence limits must bracket the power estimate")


# --- Validation ------------------------------------------------------------

def _check_record(cluster_id: str, index: int, rec: Record, out: list[str]) -> None:
    where = f"cluster {cluster_id!r}, subject {index}"
    if isinstance(rec, ContinuousRecord):
        if not math.isfinite(rec.value):
            out.append(f"{where}: field 'value' is not finite")
        return
    if rec.cluster_id != cluster_id:
        out.append(f"{where}: field 'cluster_id' is {rec.cluster_id!r}, expected {cluster_id!r}")
    if isinstance(rec, BinaryRecord):
        if rec.outcome not in (0, 1):
            out.append(f"{where}: field 'outcome' must be 0 or 1, got {rec.outcome!r}")
    elif isinstance(rec, SurvivalRecord):
        if not (rec.time > 0) or not math.isfinite(rec.time):
            out.append(f"{where}: field 'time' must be a finite positive number, got {rec.time!r}")
        if rec.event not in (0, 1):
            out.append(f"{where}: field 'event' must be 0 or 1, got {rec.event!r}")
        elif rec.event == 1:
            if rec.discharge_time is None:
                out.append(f"{where}: field 'discharge_time' is required when event = 1")
            elif rec.discharge_time < rec.time:
                out.append(
                    f"{where}: field 'discharge_time' ({rec.discharge_time}) is before 'time' ({rec.time})"
                )
        else:
            if rec.discharge_time is not None and rec.discharge_time != rec.time:
                out.append(
                    f"{where}: field 'discharge_time' must equal 'time' for censored subjects"
                )


def validate_dataset(dataset: TrialDataset) -> list[str]:
    """Return a description of every invariant violation in ``dataset``.

    An empty list means the dataset is well formed. Violations are data, not
    failures: nothing here raises.
    """
    violations: list[str] = []
    if dataset.period not in PERIODS:
        violations.append(f"dataset: field 'period' must be one of {PERIODS}, got {dataset.period!r}")

    seen: set[str] = set()
    kinds: set[type] = set()
    for cluster in dataset.clusters:
        if cluster.cluster_id in seen:
            violations.append(f"cluster {cluster.cluster_id!r}: field 'cluster_id' is duplicated")
        seen.add(cluster.cluster_id)
        if not cluster.subjects:
            violations.append(f"cluster {cluster.cluster_id!r}: field 'subjects' is empty")
            continue
        cluster_kinds = {type(rec) for rec in cluster.subjects}
        kinds |= cluster_kinds
        if len(cluster_kinds) > 1:
            violations.append(
                f"cluster {cluster.cluster_id!r}: field 'subjects' mixes record kinds"
            )
        for index, rec in enumerate(cluster.subjects):
            _check_record(cluster.cluster_id, index, rec, violations)
    if len(kinds) > 1:
        violations.append("dataset: field 'clusters' mixes record kinds across clusters")

    if dataset.arm_assignment is not None:
        assigned = set(dataset.arm_assignment)
        missing = seen - assigned
        extra = assigned - seen
        for cid in sorted(missing):
            violations.append(f"cluster {cid!r}: field 'arm_assignment' has no entry")
        for cid in sorted(extra):
            violations.append(f"cluster {cid!r}: field 'arm_assignment' names an unknown cluster")
        for cid, arm in dataset.arm_assignment.items():
            if arm not in ARMS:
                violations.append(
                    f"cluster {cid!r}: field 'arm_assignment' must be one of {ARMS}, got {arm!r}"
                )
    return violations


def dataset_from_records(
    records: Iterable[Record],
    period: str = PERIOD_BASELINE,
    arm_assignment: Optional[Mapping[str, str]] = None,
) -> TrialDataset:
    """Group records into clusters by first-appearance order of cluster_id."""
    by_cluster: dict[str, list[Record]] = {}
    for rec in records:
        cid = getattr(rec, "cluster_id", None)
        if cid is None:
            raise DomainError("continuous records carry no cluster_id and cannot form clusters")
        by_cluster.setdefault(cid, []).append(rec)
    clusters = tuple(ClusterData(cid, tuple(recs)) for cid, recs in by_cluster.items())
    return TrialDataset(clusters, period, dict(arm_assignment) if arm_assignment else None)


def split_groups(records: Sequence[ContinuousRecord]) -> dict[str, list[ContinuousRecord]]:
    """Split lab records by group label, preserving input order within groups."""
    groups: dict[str, list[ContinuousRecord]] = {}
    for rec in records:
        groups.setdefault(rec.group, []).append(rec)
    return groups
