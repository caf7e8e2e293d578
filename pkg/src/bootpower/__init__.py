"""Bootstrap power estimation for planned experiments.

Resamples observed pilot data, injects a specified alternative-hypothesis
effect, runs the planned analysis on each replicate, and reports the
rejection proportion with exact binomial confidence limits. Built for
cluster-randomized trials with a baseline observation period, including a
survival outcome analyzed by a Cox model with shared cluster frailty; a
simple non-clustered two-group ("lab") design is supported as well.
"""

__version__ = "0.1.0"

from .data_model import (
    AnalysisOutcome,
    BinaryRecord,
    ClusterData,
    ContinuousRecord,
    EffectSpec,
    EventRemoval,
    OddsMultiplier,
    PowerEstimate,
    Shift,
    SurvivalRecord,
    TrialDataset,
    validate_dataset,
)
from .effect_injector import parse_effect
from .errors import (
    BootpowerError,
    ConfigError,
    DataError,
    DegenerateDataError,
    DomainError,
    EstimationError,
)
from .power_engine import PowerConfig, estimate_power, run_replicate
from .stats_util import ExactInterval, clopper_pearson, design_effect, effective_sample_size
from .survival_fitter import CoxFit, CoxModelSpec, fit_cox, test_interaction
from .trial_simulator import SimParams, simulate

__all__ = [
    "AnalysisOutcome",
    "BinaryRecord",
    "BootpowerError",
    "ClusterData",
    "ConfigError",
    "ContinuousRecord",
    "CoxFit",
    "CoxModelSpec",
    "DataError",
    "DegenerateDataError",
    "DomainError",
    "EffectSpec",
    "EstimationError",
    "EventRemoval",
    "ExactInterval",
    "OddsMultiplier",
    "PowerConfig",
    "PowerEstimate",
    "Shift",
    "SimParams",
    "SurvivalRecord",
    "TrialDataset",
    "clopper_pearson",
    "design_effect",
    "effective_sample_size",
    "estimate_power",
    "fit_cox",
    "parse_effect",
    "run_replicate",
    "simulate",
    "test_interaction",
    "validate_dataset",
]
