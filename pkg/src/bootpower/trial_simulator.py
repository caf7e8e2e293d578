"""Synthetic multi-hospital survival data for exercising the power pipeline
without confidential pilot data.

The generating process is deliberately crude: each hospital gets a normal
log-hazard frailty; each of its wards gets a uniform size; each subject gets
a fair-coin covariate, an exponential event time whose mean depends on the
covariate and the frailty, and a coin-flip censoring decision that leaves
roughly 89% of subjects censored. Censored subjects exit at their would-be
discharge time (event time plus a fixed offset), so the discharge time of an
event subject is always known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import ClusterData, PERIOD_BASELINE, SurvivalRecord, TrialDataset
from .errors import DomainError

# subject-level laws (log mean event time 1.5 - log(2) x2 + frailty, event
# probability 0.1 + 0.015 x2, ward size ceil(33 + 33 U) -> 34..66)
_BASE_LOG_MEAN = 1.5
_X2_LOG_MEAN = -math.log(2.0)
_EVENT_PROB_BASE = 0.10
_EVENT_PROB_X2 = 0.015
_WARD_SIZE_BASE = 33.0
_WARD_SIZE_SPREAD = 33.0


@dataclass(frozen=True)
class SimParams:
    n_clusters: int = 60
    frailty_sd: float = 0.5
    n_ward_types: int = 4
    discharge_offset: float = 2.0

    def __post_init__(self) -> None:
        if self.n_clusters < 2:
            raise DomainError(f"need at least 2 clusters, got {self.n_clusters}")
        if self.frailty_sd < 0:
            raise DomainError(f"frailty_sd must be >= 0, got {self.frailty_sd}")
        if self.n_ward_types < 1:
            raise DomainError(f"need at least 1 ward type, got {self.n_ward_types}")
        if self.discharge_offset < 0:
            raise DomainError(f"discharge_offset must be >= 0, got {self.discharge_offset}")


def simulate(params: SimParams, seed: int) -> TrialDataset:
    """Generate one baseline-period dataset; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    clusters = []
    for c in range(params.n_clusters):
        cluster_id = f"h{c + 1:03d}"
        frailty = rng.normal(0.0, params.frailty_sd)
        subjects: list[SurvivalRecord] = []
        for ward in range(1, params.n_ward_types + 1):
            size = int(np.ceil(_WARD_SIZE_BASE + _WARD_SIZE_SPREAD * rng.random()))
            x2 = (rng.random(size) < 0.5).astype(float)
            mean_time = np.exp(_BASE_LOG_MEAN + _X2_LOG_MEAN * x2 + frailty)
            event_time = rng.exponential(mean_time)
            discharge = event_time + params.discharge_offset
            has_event = rng.random(size) < (_EVENT_PROB_BASE + _EVENT_PROB_X2 * x2)
            time = np.where(has_event, event_time, discharge)
            for i in range(size):
                subjects.append(
                    SurvivalRecord(
                        cluster_id=cluster_id,
                        time=float(time[i]),
                        event=int(has_event[i]),
                        discharge_time=float(discharge[i]) if has_event[i] else float(time[i]),
                        covariates=(("x2", float(x2[i])), ("wardtype", float(ward))),
                    )
                )
        clusters.append(ClusterData(cluster_id, tuple(subjects)))
    return TrialDataset(tuple(clusters), PERIOD_BASELINE)
