"""Glue between ingestion, scoring and validation used by the CLI and the tests."""

from __future__ import annotations

from typing import Sequence

from wise import config, ingestion
from wise.errors import DataError
from wise.scoring import ClassificationThresholds, MachineScoreReport, score_fleet
from wise.validation import DEFAULT_RBO_P, BenchmarkRecord, ValidationReport, validate


def score_series(
    series: Sequence[ingestion.UtilizationSeries],
    profile: config.ScoringProfile,
    thresholds: ClassificationThresholds | None = None,
) -> list[MachineScoreReport]:
    """One report per machine, ordered by machine_id."""
    thresholds = thresholds or profile.thresholds
    grouped = ingestion.group_by_machine(series)
    if not grouped:
        raise DataError("no utilization series to score")
    machines = []
    types = {}
    for machine_id in sorted(grouped):
        machine_series = grouped[machine_id]
        mtype = machine_series[0].machine_type
        specs = config.resolve(profile, mtype)
        machines.append((machine_id, ingestion.machine_readings(machine_series, specs), specs))
        types[machine_id] = mtype
    return score_fleet(machines, thresholds, machine_types=types)


def validate_fleet(
    reports: Sequence[MachineScoreReport],
    records: Sequence[BenchmarkRecord],
    variants: Sequence[str],
    thresholds: ClassificationThresholds,
    p: float = DEFAULT_RBO_P,
) -> list[ValidationReport]:
    scored = {r.machine_id for r in reports}
    benchmarked = {r.instance_type for r in records}
    if scored != benchmarked:
        only_scored = sorted(scored - benchmarked)
        only_bench = sorted(benchmarked - scored)
        raise DataError(
            "utilization machine ids and benchmark instance types differ "
            f"(only in utilization: {only_scored}; only in benchmark: {only_bench})"
        )
    return [validate(reports, records, v, thresholds, p) for v in variants]
