"""Replicate loop for bootstrap power estimation.

One replicate = bootstrap the baseline, randomize clusters (CRT only),
bootstrap the intervention period, inject the alternative-hypothesis effect
into intervention-arm data, run the planned analysis, record the rejection.
The rejection proportion over many replicates is the estimated power, with
exact binomial confidence limits for its Monte Carlo uncertainty.

Every replicate draws from streams derived from (master_seed, replicate
index), so estimates are bit-identical across runs and worker counts, and
replicates can execute on a process pool in any order.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .analysis import (
    ANALYSIS_CLUSTER_DID,
    ANALYSIS_COX_FRAILTY,
    ANALYSIS_RANK_SUM,
    ANALYSIS_WELCH_T,
    cluster_did_test,
    rank_sum_test,
    welch_t_test,
)
from .data_model import (
    ARM_INTERVENTION,
    AnalysisOutcome,
    BinaryRecord,
    ClusterData,
    ContinuousRecord,
    EffectSpec,
    EventRemoval,
    OddsMultiplier,
    PERIOD_BASELINE,
    PERIOD_INTERVENTION,
    PowerEstimate,
    Shift,
    SurvivalRecord,
    TrialDataset,
    split_groups,
    validate_dataset,
)
from .effect_injector import apply_effect, is_custom_effect
from .errors import ConfigError, DataError, DegenerateDataError, DomainError, EstimationError
from .randomizer import (
    RANDOMIZER_MATCHED_PAIRS,
    RANDOMIZER_SIMPLE,
    randomize_matched_pairs,
    randomize_simple,
    summarize_clusters,
)
from .resampler import bootstrap_simple, bootstrap_within_cluster, round_half_up
from .stats_util import clopper_pearson
from .streams import Stream, derive_seed
from .survival_fitter import CoxModelSpec, FRAILTY_PROFILED, fit_cox, test_interaction

DESIGN_LAB = "lab"
DESIGN_CRT = "crt"

POLICY_COUNT_AS_NONREJECT = "count_as_nonreject"
POLICY_EXCLUDE = "exclude"

_LAB_ANALYSES = (ANALYSIS_WELCH_T, ANALYSIS_RANK_SUM)
_CRT_ANALYSES = (ANALYSIS_CLUSTER_DID, ANALYSIS_COX_FRAILTY)

LabSource = Sequence[ContinuousRecord]
Source = Union[TrialDataset, LabSource]


@dataclass(frozen=True)
class PowerConfig:
    """Everything one power run needs besides the source data itself."""

    design: str
    effect: EffectSpec
    analysis: str
    randomizer: str = RANDOMIZER_MATCHED_PAIRS
    baseline_rate: float = 1.0
    intervention_rate: float = 1.0
    n_reps: int = 1000
    alpha: float = 0.05
    master_seed: int = 0
    failed_policy: str = POLICY_COUNT_AS_NONREJECT
    model: CoxModelSpec = field(
        default_factory=lambda: CoxModelSpec(
            include_arm=True,
            include_period=True,
            include_interaction=True,
            frailty=FRAILTY_PROFILED,
        )
    )
    source_name: str = ""

    def __post_init__(self) -> None:
        if self.design not in (DESIGN_LAB, DESIGN_CRT):
            raise ConfigError(f"unknown design {self.design!r}")
        allowed = _LAB_ANALYSES if self.design == DESIGN_LAB else _CRT_ANALYSES
        if self.analysis not in allowed:
            raise ConfigError(
                f"analysis {self.analysis!r} does not apply to the {self.design} design; "
                f"choose one of {allowed}"
            )
        if self.randomizer not in (RANDOMIZER_SIMPLE, RANDOMIZER_MATCHED_PAIRS):
            raise ConfigError(f"unknown randomizer {self.randomizer!r}")
        if not (self.baseline_rate > 0 and self.intervention_rate > 0):
            raise ConfigError("sampling rates must be > 0")
        if self.n_reps < 1:
            raise ConfigError(f"n_reps must be >= 1, got {self.n_reps}")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.failed_policy not in (POLICY_COUNT_AS_NONREJECT, POLICY_EXCLUDE):
            raise ConfigError(f"unknown failed-replicate policy {self.failed_policy!r}")
        if self.analysis == ANALYSIS_COX_FRAILTY and not (
            self.model.include_arm and self.model.include_period and self.model.include_interaction
        ):
            raise ConfigError("the cox_frailty analysis tests the arm:period term; "
                              "the model must include arm, period and their interaction")


def _effect_matches_source(config: PowerConfig, source: Source) -> None:
    if is_custom_effect(config.effect):
        return  # a user-supplied transform owns its record-kind contract
    if config.design == DESIGN_LAB:
        if not isinstance(config.effect, Shift):
            raise ConfigError("the lab design takes a shift effect")
        return
    first = source.clusters[0].subjects[0]
    if isinstance(config.effect, OddsMultiplier) and not isinstance(first, BinaryRecord):
        raise ConfigError("an odds-multiplier effect needs binary outcome data")
    if isinstance(config.effect, EventRemoval) and not isinstance(first, SurvivalRecord):
        raise ConfigError("an event-removal effect needs survival outcome data")
    if isinstance(config.effect, Shift):
        raise ConfigError("a shift effect applies to the lab design")


def validate_source(config: PowerConfig, source: Source) -> None:
    """Raise DataError/ConfigError if the source cannot drive this config."""
    if config.design == DESIGN_LAB:
        if isinstance(source, TrialDataset):
            raise ConfigError("the lab design takes a flat list of continuous records")
        records = list(source)
        if not all(isinstance(rec, ContinuousRecord) for rec in records):
            raise DataError("lab source must contain continuous records only")
        groups = split_groups(records)
        if len(groups) != 2:
            raise DataError(f"lab source must contain exactly 2 groups, found {sorted(groups)}")
        for label, values in groups.items():
            if len(values) < 2:
                raise DataError(f"group {label!r} needs at least 2 values")
    else:
        if not isinstance(source, TrialDataset):
            raise ConfigError("the crt design takes a TrialDataset")
        violations = validate_dataset(source)
        if violations:
            raise DataError("source dataset is invalid: " + "; ".join(violations))
        if len(source.clusters) < 2:
            raise DataError("the crt design needs at least 2 clusters")
    _effect_matches_source(config, source)


def _run_lab(config: PowerConfig, source: LabSource, stream: Stream) -> AnalysisOutcome:
    groups = split_groups(list(source))
    label_a, label_b = sorted(groups)
    group_a, group_b = groups[label_a], groups[label_b]
    boot_a = bootstrap_simple(
        group_a, round_half_up(config.baseline_rate * len(group_a)),
        stream.child("baseline").generator(),
    )
    boot_b = bootstrap_simple(
        group_b, round_half_up(config.intervention_rate * len(group_b)),
        stream.child("intervention").generator(),
    )
    modified = apply_effect(config.effect, boot_b, stream.child("effect").generator())
    values_a = [rec.value for rec in boot_a]
    values_c = [rec.value for rec in modified]
    if config.analysis == ANALYSIS_WELCH_T:
        return welch_t_test(values_a, values_c, config.alpha)
    return rank_sum_test(values_a, values_c, config.alpha)


def _randomize(config: PowerConfig, baseline: TrialDataset, stream: Stream) -> dict[str, str]:
    rng = stream.child("randomize").generator()
    if config.randomizer == RANDOMIZER_SIMPLE:
        return randomize_simple(list(baseline.cluster_ids), rng)
    return randomize_matched_pairs(summarize_clusters(baseline), rng)


def _inject_intervention_arm(
    config: PowerConfig, intervention: TrialDataset, arms: dict[str, str], stream: Stream
) -> TrialDataset:
    clusters = []
    for position, cluster in enumerate(intervention.clusters):
        if arms[cluster.cluster_id] == ARM_INTERVENTION:
            rng = stream.child("effect", position).generator()
            modified = apply_effect(config.effect, cluster.subjects, rng)
            clusters.append(ClusterData(cluster.cluster_id, tuple(modified)))
        else:
            clusters.append(cluster)
    return TrialDataset(tuple(clusters), PERIOD_INTERVENTION, arms)


def _cox_outcome(
    config: PowerConfig, baseline: TrialDataset, intervention: TrialDataset
) -> AnalysisOutcome:
    subjects: list[SurvivalRecord] = []
    arm_col: list[int] = []
    period_col: list[int] = []
    for dataset, period_flag in ((baseline, 0), (intervention, 1)):
        arms = dataset.arm_assignment
        for cluster in dataset.clusters:
            flag = 1 if arms[cluster.cluster_id] == ARM_INTERVENTION else 0
            subjects.extend(cluster.subjects)
            arm_col.extend([flag] * cluster.size)
            period_col.extend([period_flag] * cluster.size)
    fit = fit_cox(subjects, config.model, arm_col, period_col)
    return test_interaction(fit, config.alpha)


def _run_crt(config: PowerConfig, source: TrialDataset, stream: Stream) -> AnalysisOutcome:
    baseline = bootstrap_within_cluster(source, config.baseline_rate, stream.child("baseline"))
    arms = _randomize(config, baseline, stream)
    intervention = bootstrap_within_cluster(
        source, config.intervention_rate, stream.child("intervention")
    )
    baseline = TrialDataset(baseline.clusters, PERIOD_BASELINE, arms)
    intervention = _inject_intervention_arm(config, intervention, arms, stream)
    if config.analysis == ANALYSIS_CLUSTER_DID:
        return cluster_did_test(baseline, intervention, config.alpha)
    return _cox_outcome(config, baseline, intervention)


def run_replicate(config: PowerConfig, source: Source, replicate_index: int) -> AnalysisOutcome:
    """Run one full bootstrap replicate; deterministic in (config, source, index).

    Data-dependent analysis failures (degenerate statistics, non-converged
    fits, singular designs on a particular resample) come back as
    non-converged outcomes instead of aborting the whole run.
    """
    stream = Stream(derive_seed(config.master_seed, "replicate", replicate_index))
    runner = _run_lab if config.design == DESIGN_LAB else _run_crt
    try:
        return runner(config, source, stream)
    except DegenerateDataError as exc:
        return AnalysisOutcome.failed(f"degenerate replicate: {exc}")
    except (DomainError, np.linalg.LinAlgError) as exc:
        return AnalysisOutcome.failed(f"analysis failed: {exc}")


# --- parallel execution ------------------------------------------------------

_WORKER_CONFIG: Optional[PowerConfig] = None
_WORKER_SOURCE: Optional[Source] = None


def _init_worker(config: PowerConfig, source: Source) -> None:
    global _WORKER_CONFIG, _WORKER_SOURCE
    _WORKER_CONFIG = config
    _WORKER_SOURCE = source


def _run_chunk(indices: Sequence[int]) -> list[tuple[bool, bool]]:
    return [
        (outcome.reject, outcome.converged)
        for outcome in (run_replicate(_WORKER_CONFIG, _WORKER_SOURCE, i) for i in indices)
    ]


def estimate_power(config: PowerConfig, source: Source, n_workers: int = 1) -> PowerEstimate:
    """Estimate power as the rejection proportion over config.n_reps replicates.

    The estimate and its exact 95% confidence limits are identical for any
    worker count: each replicate's randomness depends only on (master_seed,
    replicate index), and only rejection/convergence counts are aggregated.
    """
    validate_source(config, source)
    if n_workers < 1:
        raise ConfigError(f"n_workers must be >= 1, got {n_workers}")

    indices = range(config.n_reps)
    results: list[tuple[bool, bool]] = []
    if n_workers == 1 or config.n_reps == 1:
        for i in indices:
            outcome = run_replicate(config, source, i)
            results.append((outcome.reject, outcome.converged))
    else:
        chunk = max(1, -(-config.n_reps // (n_workers * 4)))
        chunks = [list(indices[start : start + chunk]) for start in range(0, config.n_reps, chunk)]
        with ProcessPoolExecutor(
            max_workers=n_workers, initializer=_init_worker, initargs=(config, source)
        ) as pool:
            for part in pool.map(_run_chunk, chunks):
                results.extend(part)

    n_reject = sum(1 for reject, _ in results if reject)
    n_failed = sum(1 for _, converged in results if not converged)
    if config.failed_policy == POLICY_EXCLUDE:
        denominator = config.n_reps - n_failed
        if denominator == 0:
            raise EstimationError("every replicate failed; no valid replicates to estimate from")
    else:
        denominator = config.n_reps
    interval = clopper_pearson(n_reject, denominator, 0.95)
    return PowerEstimate(
        n_reps=config.n_reps,
        n_reject=n_reject,
        n_failed=n_failed,
        power=n_reject / denominator,
        ci_low=interval.low,
        ci_high=interval.high,
        alpha=config.alpha,
        master_seed=config.master_seed,
    )
