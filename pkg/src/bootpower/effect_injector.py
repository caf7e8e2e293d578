"""Transforms that make a specified alternative hypothesis true in
bootstrapped intervention-period data.

Each injector is pure given its rng stream and preserves record order. The
identity settings (shift 0, odds multiplier 1 additive, removal fraction 0)
return the input data structurally unchanged, which is what makes the null
face-validity check meaningful.
"""
from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np

from .data_model import (
    BinaryRecord,
    ContinuousRecord,
    EffectSpec,
    EventRemoval,
    MODE_DISCHARGE_SUBSTITUTION,
    ODDS_ADDITIVE,
    ODDS_RESET,
    OddsMultiplier,
    Record,
    SELECT_BERNOULLI,
    Shift,
    SurvivalRecord,
)
from .errors import DegenerateDataError, DomainError
from .resampler import round_half_up


def shift_continuous(
    values: Sequence[ContinuousRecord], delta: float, new_group: str | None = None
) -> list[ContinuousRecord]:
    """Add ``delta`` to every value, optionally relabeling the group.

    The relabel is cosmetic (e.g. condition B becomes hypothetical condition
    C); by default labels are kept so that a zero shift is an exact identity.
    """
    if delta == 0 and new_group is None:
        return list(values)
    return [
        ContinuousRecord(new_group if new_group is not None else rec.group, rec.value + delta)
        for rec in values
    ]


def inflate_odds_binary(
    cluster: Sequence[BinaryRecord],
    theta: float,
    variant: str,
    rng: np.random.Generator,
) -> list[BinaryRecord]:
    """Multiply a cluster's outcome odds by ``theta``.

    With within-cluster proportion p and odds o = p / (1 - p), the implied
    intervention-period probability is p' = theta * o / (1 + theta * o).
    The ``reset`` variant redraws every outcome as Bernoulli(p'). The
    ``additive`` variant keeps observed 1s and flips each 0 up independently
    with probability (p' - p) / (1 - p), so real outcomes are only added to.
    """
    if not cluster:
        raise DomainError("cannot inject an odds effect into an empty cluster")
    if variant not in (ODDS_RESET, ODDS_ADDITIVE):
        raise DomainError(f"unknown odds variant {variant!r}")
    n = len(cluster)
    p_base = sum(rec.outcome for rec in cluster) / n
    if p_base == 0.0:
        warnings.warn(
            f"cluster {cluster[0].cluster_id!r} has no outcomes; odds are 0 for every "
            "multiplier, data returned unchanged",
            stacklevel=2,
        )
        return list(cluster)
    if variant == ODDS_ADDITIVE and theta == 1.0:
        return list(cluster)

    if p_base == 1.0:
        if variant == ODDS_ADDITIVE:
            raise DegenerateDataError(
                f"cluster {cluster[0].cluster_id!r} is all-outcome; the additive variant "
                "has no zeros to flip"
            )
        p_new = 1.0
    else:
        odds = p_base / (1.0 - p_base)
        p_new = theta * odds / (1.0 + theta * odds)

    if variant == ODDS_RESET:
        draws = rng.random(n) < p_new
        return [BinaryRecord(rec.cluster_id, int(hit)) for rec, hit in zip(cluster, draws)]

    flip_p = (p_new - p_base) / (1.0 - p_base)
    if flip_p < 0:
        raise DomainError(
            f"additive odds variant requires theta >= 1 (got {theta}); it can only add outcomes"
        )
    draws = rng.random(n)
    return [
        rec if rec.outcome == 1 else BinaryRecord(rec.cluster_id, int(draws[i] < flip_p))
        for i, rec in enumerate(cluster)
    ]


def remove_events_survival(
    subjects: Sequence[SurvivalRecord],
    fraction: float,
    mode: str,
    selection: str,
    rng: np.random.Generator,
) -> list[SurvivalRecord]:
    """Reassign a fraction of event subjects to be censorings.

    Selected subjects get event = 0. In ``discharge_substitution`` mode the
    event time is replaced by the post-event discharge time; in
    ``censor_at_event`` mode the time is left unchanged. Either way the
    modified record's discharge_time collapses onto its time, as required of
    censored records.
    """
    if not (0.0 <= fraction <= 1.0):
        raise DomainError(f"removal fraction must lie in [0, 1], got {fraction}")
    if fraction == 0.0:
        return list(subjects)

    event_positions = [i for i, rec in enumerate(subjects) if rec.event == 1]
    n_events = len(event_positions)
    if n_events == 0:
        return list(subjects)

    if selection == SELECT_BERNOULLI:
        hits = rng.random(n_events) < fraction
        selected = {pos for pos, hit in zip(event_positions, hits) if hit}
    else:
        k = round_half_up(fraction * n_events)
        chosen = rng.choice(n_events, size=k, replace=False)
        selected = {event_positions[i] for i in chosen}

    out: list[SurvivalRecord] = []
    for i, rec in enumerate(subjects):
        if i not in selected:
            out.append(rec)
            continue
        if rec.discharge_time is None:
            raise DomainError(
                f"cluster {rec.cluster_id!r}: event subject lacks a discharge_time to substitute"
            )
        new_time = rec.discharge_time if mode == MODE_DISCHARGE_SUBSTITUTION else rec.time
        out.append(
            SurvivalRecord(
                cluster_id=rec.cluster_id,
                time=new_time,
                event=0,
                discharge_time=new_time,
                covariates=rec.covariates,
            )
        )
    return out


def is_custom_effect(spec) -> bool:
    """True for user-supplied ``(records, rng) -> records`` transforms."""
    return callable(spec) and not isinstance(spec, (Shift, OddsMultiplier, EventRemoval))


def apply_effect(
    spec: EffectSpec, subjects: Sequence[Record], rng: np.random.Generator
) -> list[Record]:
    """Dispatch an effect spec onto one cluster's (or group's) records.

    Besides the three built-in specs, any callable ``(records, rng) ->
    records`` is accepted, so custom alternatives (heterogeneous shifts,
    preferential removal of early events, ...) can be plugged in without
    touching the pipeline.
    """
    if is_custom_effect(spec):
        return list(spec(subjects, rng))
    if isinstance(spec, Shift):
        if subjects and not isinstance(subjects[0], ContinuousRecord):
            raise DomainError("a shift effect applies to continuous records only")
        return shift_continuous(subjects, spec.delta)
    if isinstance(spec, OddsMultiplier):
        if subjects and not isinstance(subjects[0], BinaryRecord):
            raise DomainError("an odds-multiplier effect applies to binary records only")
        return inflate_odds_binary(subjects, spec.theta, spec.variant, rng)
    if isinstance(spec, EventRemoval):
        if subjects and not isinstance(subjects[0], SurvivalRecord):
            raise DomainError("an event-removal effect applies to survival records only")
        return remove_events_survival(subjects, spec.fraction, spec.mode, spec.selection, rng)
    raise DomainError(f"unknown effect spec {spec!r}")


_MODE_ALIASES = {
    "discharge": MODE_DISCHARGE_SUBSTITUTION,
    "discharge_substitution": MODE_DISCHARGE_SUBSTITUTION,
    "censor": "censor_at_event",
    "censor_at_event": "censor_at_event",
}
_SELECTION_ALIASES = {
    "bernoulli": SELECT_BERNOULLI,
    "exact": "exact_count",
    "exact_count": "exact_count",
}


def parse_effect(text: str) -> EffectSpec:
    """Parse a config-string effect.

    Accepted forms: ``shift:<delta>``, ``odds:<theta>[:reset|additive]``,
    ``remove-events:<f>[:discharge|censor][:bernoulli|exact]``.
    """
    parts = text.strip().split(":")
    kind = parts[0].strip().lower()
    args = [p.strip().lower() for p in parts[1:]]
    try:
        if kind == "shift":
            if len(args) != 1:
                raise DomainError(f"shift takes exactly one argument, got {text!r}")
            return Shift(delta=float(args[0]))
        if kind == "odds":
            if len(args) not in (1, 2):
                raise DomainError(f"odds takes one or two arguments, got {text!r}")
            variant = args[1] if len(args) == 2 else ODDS_RESET
            if variant not in (ODDS_RESET, ODDS_ADDITIVE):
                raise DomainError(f"unknown odds variant {variant!r}")
            return OddsMultiplier(theta=float(args[0]), variant=variant)
        if kind == "remove-events":
            if len(args) not in (1, 2, 3):
                raise DomainError(f"remove-events takes one to three arguments, got {text!r}")
            mode = _MODE_ALIASES.get(args[1]) if len(args) >= 2 else MODE_DISCHARGE_SUBSTITUTION
            if mode is None:
                raise DomainError(f"unknown removal mode {args[1]!r}")
            selection = _SELECTION_ALIASES.get(args[2]) if len(args) >= 3 else SELECT_BERNOULLI
            if selection is None:
                raise DomainError(f"unknown selection rule {args[2]!r}")
            return EventRemoval(fraction=float(args[0]), mode=mode, selection=selection)
    except ValueError as exc:
        raise DomainError(f"could not parse effect {text!r}: {exc}") from None
    raise DomainError(f"unknown effect kind {kind!r} in {text!r}")


def effect_to_string(spec: EffectSpec) -> str:
    """Canonical config-string form of an effect, the inverse of parse_effect."""
    if is_custom_effect(spec):
        return f"custom:{getattr(spec, '__name__', type(spec).__name__)}"
    if isinstance(spec, Shift):
        return f"shift:{spec.delta}"
    if isinstance(spec, OddsMultiplier):
        return f"odds:{spec.theta}:{spec.variant}"
    if isinstance(spec, EventRemoval):
        mode = "discharge" if spec.mode == MODE_DISCHARGE_SUBSTITUTION else "censor"
        selection = "bernoulli" if spec.selection == SELECT_BERNOULLI else "exact"
        return f"remove-events:{spec.fraction}:{mode}:{selection}"
    raise DomainError(f"unknown effect spec {spec!r}")
