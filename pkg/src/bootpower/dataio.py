"""CSV ingestion and emission for the three record kinds.

Schemas (UTF-8, comma-separated, ``.`` decimal):

* survival:   ``cluster_id,time,event,discharge_time,<covariate...>``
* binary:     ``cluster_id,outcome``
* continuous: ``group,value``

A survival row with ``event = 1`` must carry a discharge_time; censored rows
may leave it empty, in which case it is stored equal to the time. Cluster
order is the order of first appearance in the file, and floats are written
with ``repr`` so a write/read round trip reproduces the dataset exactly.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from .data_model import (
    BinaryRecord,
    ContinuousRecord,
    PERIOD_BASELINE,
    SurvivalRecord,
    TrialDataset,
    dataset_from_records,
)
from .errors import DataError

KIND_SURVIVAL = "survival"
KIND_BINARY = "binary"
KIND_CONTINUOUS = "continuous"

_FIXED_SURVIVAL = ("cluster_id", "time", "event", "discharge_time")


def _open_rows(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    if not path.exists():
        raise DataError(f"data file {path} does not exist")
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise DataError(f"{path}: missing header row")
            return list(reader.fieldnames), list(reader)
    except OSError as exc:
        raise DataError(f"could not read {path}: {exc}") from exc


def _parse_float(row_number: int, path: Path, name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"{path}, row {row_number}: field {name!r} is not numeric: {raw!r}") from None


def _parse_int(row_number: int, path: Path, name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"{path}, row {row_number}: field {name!r} is not an integer: {raw!r}") from None


def read_survival_csv(path: Path, period: str = PERIOD_BASELINE) -> TrialDataset:
    header, rows = _open_rows(path)
    if tuple(header[:4]) != _FIXED_SURVIVAL:
        raise DataError(
            f"{path}: survival header must start with {','.join(_FIXED_SURVIVAL)}, got {','.join(header)}"
        )
    covariate_names = header[4:]
    records: list[SurvivalRecord] = []
    for number, row in enumerate(rows, start=2):
        time = _parse_float(number, path, "time", row["time"])
        event = _parse_int(number, path, "event", row["event"])
        raw_discharge = (row.get("discharge_time") or "").strip()
        if raw_discharge:
            discharge = _parse_float(number, path, "discharge_time", raw_discharge)
        elif event == 1:
            raise DataError(f"{path}, row {number}: field 'discharge_time' is required when event = 1")
        else:
            discharge = time
        covariates = tuple(
            (name, _parse_float(number, path, name, row[name])) for name in covariate_names
        )
        records.append(SurvivalRecord(row["cluster_id"], time, event, discharge, covariates))
    if not records:
        raise DataError(f"{path}: no data rows")
    return dataset_from_records(records, period)


def read_binary_csv(path: Path, period: str = PERIOD_BASELINE) -> TrialDataset:
    header, rows = _open_rows(path)
    if tuple(header) != ("cluster_id", "outcome"):
        raise DataError(f"{path}: binary header must be cluster_id,outcome, got {','.join(header)}")
    records = [
        BinaryRecord(row["cluster_id"], _parse_int(number, path, "outcome", row["outcome"]))
        for number, row in enumerate(rows, start=2)
    ]
    if not records:
        raise DataError(f"{path}: no data rows")
    return dataset_from_records(records, period)


def read_continuous_csv(path: Path) -> list[ContinuousRecord]:
    header, rows = _open_rows(path)
    if tuple(header) != ("group", "value"):
        raise DataError(f"{path}: continuous header must be group,value, got {','.join(header)}")
    records = [
        ContinuousRecord(row["group"], _parse_float(number, path, "value", row["value"]))
        for number, row in enumerate(rows, start=2)
    ]
    if not records:
        raise DataError(f"{path}: no data rows")
    return records


def read_source(path: Path, kind: str, period: str = PERIOD_BASELINE):
    if kind == KIND_SURVIVAL:
        return read_survival_csv(path, period)
    if kind == KIND_BINARY:
        return read_binary_csv(path, period)
    if kind == KIND_CONTINUOUS:
        return read_continuous_csv(path)
    raise DataError(f"unknown data kind {kind!r}; expected survival, binary or continuous")


def _covariate_names(dataset: TrialDataset) -> list[str]:
    first = dataset.clusters[0].subjects[0]
    return [name for name, _ in first.covariates]


def write_survival_csv(dataset: TrialDataset, path: Path) -> int:
    """Write a survival dataset; returns the number of data rows."""
    covariates = _covariate_names(dataset)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(_FIXED_SURVIVAL) + covariates)
        for cluster in dataset.clusters:
            for rec in cluster.subjects:
                values = dict(rec.covariates)
                # canonical form: a censored subject's discharge equals its time
                discharge = rec.discharge_time if rec.discharge_time is not None else rec.time
                writer.writerow(
                    [rec.cluster_id, repr(rec.time), rec.event, repr(discharge)]
                    + [repr(values[name]) for name in covariates]
                )
                count += 1
    return count


def write_binary_csv(dataset: TrialDataset, path: Path) -> int:
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["cluster_id", "outcome"])
        for cluster in dataset.clusters:
            for rec in cluster.subjects:
                writer.writerow([rec.cluster_id, rec.outcome])
                count += 1
    return count


def write_continuous_csv(records: Iterable[ContinuousRecord], path: Path) -> int:
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["group", "value"])
        for rec in records:
            writer.writerow([rec.group, repr(rec.value)])
            count += 1
    return count
