"""Command-line interface: ``power``, ``simulate``, ``de`` and ``validate``.

Exit codes partition failures: 0 success, 2 config error (bad flags or
config file), 3 data error (missing/malformed data file), 4 estimation
error. The ``power`` subcommand writes a machine-readable JSON report and
prints a short human summary; reports are identical across runs for fixed
flags, files and seed (timestamps aside).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .data_model import EventRemoval, OddsMultiplier, Shift, validate_dataset
from .dataio import (
    KIND_BINARY,
    KIND_CONTINUOUS,
    KIND_SURVIVAL,
    read_source,
    write_survival_csv,
)
from .effect_injector import effect_to_string, parse_effect
from .errors import (
    BootpowerError,
    ConfigError,
    DataError,
    DomainError,
    EstimationError,
)
from .power_engine import DESIGN_CRT, DESIGN_LAB, PowerConfig, estimate_power
from .stats_util import design_effect, effective_sample_size
from .survival_fitter import CoxModelSpec, FRAILTY_NONE, FRAILTY_PROFILED
from .trial_simulator import SimParams, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4

SEED_ENV_VAR = "BOOTPOWER_SEED"

_CONFIG_KEYS = {
    "scenario", "design", "analysis", "randomizer", "effect",
    "baseline_rate", "intervention_rate", "reps", "alpha", "seed",
    "threads", "failed_policy", "data_kind", "covariates", "frailty",
    "frailty_variance",
}


@dataclasses.dataclass(frozen=True)
class RunReport:
    """One power run's inputs and results, as written to the report file."""

    scenario: str
    config: dict
    estimate: dict
    wall_seconds: float
    engine_version: str
    timestamp: str


def _load_config_file(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return raw


def _merged_setting(args: argparse.Namespace, file_values: dict, key: str, default):
    flag_value = getattr(args, key, None)
    if flag_value is not None:
        return flag_value
    if key in file_values:
        return file_values[key]
    return default


def _resolve_seed(args: argparse.Namespace, file_values: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in file_values:
        return int(file_values["seed"])
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return 0


def _infer_kind(effect, explicit: Optional[str]) -> str:
    if explicit is not None:
        return explicit
    if isinstance(effect, Shift):
        return KIND_CONTINUOUS
    if isinstance(effect, OddsMultiplier):
        return KIND_BINARY
    if isinstance(effect, EventRemoval):
        return KIND_SURVIVAL
    raise ConfigError(f"cannot infer data kind for effect {effect!r}")


def _build_power_config(args: argparse.Namespace) -> tuple[PowerConfig, str, int, str]:
    file_values = _load_config_file(Path(args.config)) if args.config else {}
    effect_text = _merged_setting(args, file_values, "effect", None)
    if effect_text is None:
        raise ConfigError("no effect given; use --effect or the config file")
    try:
        effect = parse_effect(str(effect_text))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    design = _merged_setting(args, file_values, "design", DESIGN_CRT)
    analysis = _merged_setting(args, file_values, "analysis", None)
    if analysis is None:
        analysis = "welch_t" if design == DESIGN_LAB else "cox_frailty"

    covariates = file_values.get("covariates", [])
    if args.covariates is not None:
        covariates = [c for c in args.covariates.split(",") if c]
    frailty = _merged_setting(args, file_values, "frailty", FRAILTY_PROFILED)
    frailty_variance = float(_merged_setting(args, file_values, "frailty_variance", 0.25))
    try:
        model = CoxModelSpec(
            covariates=tuple(covariates),
            include_arm=True,
            include_period=True,
            include_interaction=True,
            frailty=frailty,
            frailty_variance=frailty_variance,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    seed = _resolve_seed(args, file_values)
    threads = int(_merged_setting(args, file_values, "threads", os.cpu_count() or 1))
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    try:
        config = PowerConfig(
            design=str(design),
            effect=effect,
            analysis=str(analysis),
            randomizer=str(_merged_setting(args, file_values, "randomizer", "matched_pairs")),
            baseline_rate=float(_merged_setting(args, file_values, "baseline_rate", 1.0)),
            intervention_rate=float(_merged_setting(args, file_values, "intervention_rate", 1.0)),
            n_reps=int(_merged_setting(args, file_values, "reps", 1000)),
            alpha=float(_merged_setting(args, file_values, "alpha", 0.05)),
            master_seed=seed,
            failed_policy=str(
                _merged_setting(args, file_values, "failed_policy", "count_as_nonreject")
            ),
            model=model,
            source_name=str(args.data),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    scenario = str(file_values.get("scenario", Path(args.data).stem))
    kind = _infer_kind(effect, _merged_setting(args, file_values, "data_kind", None))
    return config, scenario, threads, kind


def _config_as_dict(config: PowerConfig) -> dict:
    raw = dataclasses.asdict(config)
    raw["effect"] = effect_to_string(config.effect)
    raw["model"]["covariates"] = list(config.model.covariates)
    return raw


def cmd_power(args: argparse.Namespace) -> int:
    config, scenario, threads, kind = _build_power_config(args)
    source = read_source(Path(args.data), kind)
    started = time.perf_counter()
    estimate = estimate_power(config, source, n_workers=threads)
    wall = time.perf_counter() - started

    report = RunReport(
        scenario=scenario,
        config=_config_as_dict(config),
        estimate=dataclasses.asdict(estimate),
        wall_seconds=round(wall, 3),
        engine_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    report_path = Path(args.report)
    try:
        report_path.write_text(json.dumps(dataclasses.asdict(report), indent=2) + "\n")
    except OSError as exc:
        raise DataError(f"could not write report {report_path}: {exc}") from exc

    print(f"scenario:     {scenario}")
    print(f"replicates:   {estimate.n_reps} ({estimate.n_failed} failed)")
    print(f"rejections:   {estimate.n_reject}")
    print(f"power:        {estimate.power:.4f}")
    print(f"exact 95% CI: ({estimate.ci_low:.4f}, {estimate.ci_high:.4f})")
    print(f"seed:         {estimate.master_seed}")
    print(f"report:       {report_path} ({wall:.1f}s)")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        params = SimParams(
            n_clusters=args.clusters,
            frailty_sd=args.frailty_sd,
            n_ward_types=args.wards,
            discharge_offset=args.discharge_offset,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    seed = args.seed if args.seed is not None else 0
    dataset = simulate(params, seed)
    out = Path(args.out)
    try:
        rows = write_survival_csv(dataset, out)
    except OSError as exc:
        raise DataError(f"could not write {out}: {exc}") from exc
    print(f"wrote {rows} subjects across {len(dataset.clusters)} clusters to {out}")
    return EXIT_OK


def cmd_de(args: argparse.Namespace) -> int:
    try:
        de = design_effect(args.m, args.rho)
        print(f"design effect: {de:g}")
        if args.n is not None:
            ess = effective_sample_size(args.n, args.m, args.rho)
            print(f"effective sample size: {ess:.2f}")
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    source = read_source(Path(args.data), args.kind)
    if args.kind == KIND_CONTINUOUS:
        print(f"{args.data}: {len(source)} continuous records, schema ok")
        return EXIT_OK
    violations = validate_dataset(source)
    if violations:
        for violation in violations:
            print(violation)
        print(f"{args.data}: {len(violations)} violation(s)")
        return EXIT_DATA
    print(f"{args.data}: ok ({len(source.clusters)} clusters, {source.n_subjects} subjects)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bootpower",
        description="Bootstrap power estimation for planned experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_power = sub.add_parser("power", help="estimate power by bootstrap resampling")
    p_power.add_argument("--data", required=True, help="source data CSV")
    p_power.add_argument("--config", help="TOML config file; flags override its values")
    p_power.add_argument("--effect", help="effect spec, e.g. remove-events:0.2")
    p_power.add_argument("--design", choices=[DESIGN_LAB, DESIGN_CRT])
    p_power.add_argument("--analysis", help="welch_t | rank_sum | cluster_did | cox_frailty")
    p_power.add_argument("--randomizer", help="simple | matched_pairs")
    p_power.add_argument("--baseline-rate", dest="baseline_rate", type=float)
    p_power.add_argument("--intervention-rate", dest="intervention_rate", type=float)
    p_power.add_argument("--reps", dest="reps", type=int)
    p_power.add_argument("--alpha", type=float)
    p_power.add_argument("--seed", type=int, help=f"master seed (falls back to ${SEED_ENV_VAR})")
    p_power.add_argument("--threads", type=int)
    p_power.add_argument("--failed-policy", dest="failed_policy",
                         choices=["count_as_nonreject", "exclude"])
    p_power.add_argument("--data-kind", dest="data_kind",
                         choices=[KIND_SURVIVAL, KIND_BINARY, KIND_CONTINUOUS])
    p_power.add_argument("--covariates", help="comma-separated covariate names for the Cox model")
    p_power.add_argument("--frailty", choices=[FRAILTY_NONE, "fixed", FRAILTY_PROFILED])
    p_power.add_argument("--frailty-variance", dest="frailty_variance", type=float)
    p_power.add_argument("--report", default="power_report.json", help="report output path")
    p_power.set_defaults(func=cmd_power)

    p_sim = sub.add_parser("simulate", help="generate a synthetic multi-hospital survival CSV")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--clusters", type=int, default=60)
    p_sim.add_argument("--frailty-sd", dest="frailty_sd", type=float, default=0.5)
    p_sim.add_argument("--wards", type=int, default=4)
    p_sim.add_argument("--discharge-offset", dest="discharge_offset", type=float, default=2.0)
    p_sim.add_argument("--seed", type=int)
    p_sim.set_defaults(func=cmd_simulate)

    p_de = sub.add_parser("de", help="design effect and effective sample size")
    p_de.add_argument("--m", type=float, required=True, help="mean cluster size")
    p_de.add_argument("--rho", type=float, required=True, help="intraclass correlation")
    p_de.add_argument("--n", type=int, help="total subjects, for effective sample size")
    p_de.set_defaults(func=cmd_de)

    p_val = sub.add_parser("validate", help="check a data file against the schema invariants")
    p_val.add_argument("--data", required=True)
    p_val.add_argument("--kind", required=True,
                       choices=[KIND_SURVIVAL, KIND_BINARY, KIND_CONTINUOUS])
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except BootpowerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
