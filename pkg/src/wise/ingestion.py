"""Utilization series parsing and reduction to aggregated rates.

Input rows carry ``machine_id,machine_type,metric,timestamp,rate``; rows for
one ``(machine_id, metric)`` pair form a series. Percentiles use the
nearest-rank definition, so every percentile is an observed sample.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from wise import kernels
from wise.errors import DataError
from wise.scoring import ResourceReading, ResourceSpec

COLUMNS = ("machine_id", "machine_type", "metric", "timestamp", "rate")
PERCENTILE_METHOD = "nearest-rank"

_KIND_RE = re.compile(r"^(avg|p([1-9][0-9]?))$")


@dataclass(frozen=True, eq=False)
class UtilizationSeries:
    machine_id: str
    machine_type: str
    metric: str
    timestamps: np.ndarray
    rates: np.ndarray

    @property
    def samples(self) -> list[tuple[int, float]]:
        return list(zip(self.timestamps.tolist(), self.rates.tolist()))

    def __len__(self) -> int:
        return int(self.rates.size)


@dataclass(frozen=True)
class AggregationRequest:
    metric: str
    kind: str

    def __post_init__(self):
        if not _KIND_RE.match(self.kind):
            raise DataError(f"malformed aggregation {self.kind!r}; expected avg or p1..p99")

    @property
    def percentile(self) -> int | None:
        return None if self.kind == "avg" else int(self.kind[1:])

    @property
    def name(self) -> str:
        return f"{self.metric}/{self.kind}"

    @classmethod
    def from_name(cls, name: str) -> "AggregationRequest":
        """``"cpu/p95"`` -> ``AggregationRequest("cpu", "p95")``; a bare metric means avg."""
        metric, _, kind = name.partition("/")
        return cls(metric, kind or "avg")


class _SeriesBuilder:
    def __init__(self, machine_id: str, machine_type: str, metric: str):
        self.machine_id = machine_id
        self.machine_type = machine_type
        self.metric = metric
        self.timestamps: list[int] = []
        self.rates: list[float] = []

    def build(self) -> UtilizationSeries:
        return UtilizationSeries(
            self.machine_id,
            self.machine_type,
            self.metric,
            np.asarray(self.timestamps, dtype=np.int64),
            np.asarray(self.rates, dtype=np.float64),
        )


def _parse_timestamp(raw: Any, line: int, source: str | None) -> int:
    if isinstance(raw, bool):
        raise DataError(f"timestamp must be integer epoch seconds, got {raw!r}", line, source)
    if isinstance(raw, int):
        return raw
    if isinstance(raw, float) and raw.is_integer():
        return int(raw)
    try:
        return int(str(raw).strip())
    except ValueError:
        raise DataError(f"timestamp must be integer epoch seconds, got {raw!r}", line, source) from None


def _parse_rate(raw: Any, line: int, source: str | None) -> float:
    try:
        rate = float(raw) if not isinstance(raw, bool) else math.nan
    except (TypeError, ValueError):
        raise DataError(f"rate must be a number, got {raw!r}", line, source) from None
    if not math.isfinite(rate) or not 0 <= rate <= 100:
        raise DataError(f"rate {raw!r} outside [0, 100]", line, source)
    return rate


def _collect(rows: Iterable[tuple[int, Mapping[str, Any]]], source: str | None) -> list[UtilizationSeries]:
    groups: dict[tuple[str, str], _SeriesBuilder] = {}
    machine_types: dict[str, str] = {}
    for line, row in rows:
        for col in COLUMNS:
            value = row.get(col)
            if value is None or (isinstance(value, str) and not value.strip()):
                raise DataError(f"missing value for {col!r}", line, source)
        machine_id = str(row["machine_id"]).strip()
        machine_type = str(row["machine_type"]).strip()
        metric = str(row["metric"]).strip()
        ts = _parse_timestamp(row["timestamp"], line, source)
        rate = _parse_rate(row["rate"], line, source)

        known_type = machine_types.setdefault(machine_id, machine_type)
        if known_type != machine_type:
            raise DataError(
                f"machine {machine_id!r} listed as {machine_type!r}, earlier as {known_type!r}", line, source
            )
        key = (machine_id, metric)
        builder = groups.get(key)
        if builder is None:
            builder = groups[key] = _SeriesBuilder(machine_id, machine_type, metric)
        if builder.timestamps and ts <= builder.timestamps[-1]:
            raise DataError(
                f"timestamp {ts} not after {builder.timestamps[-1]} for {machine_id}/{metric}", line, source
            )
        builder.timestamps.append(ts)
        builder.rates.append(rate)
    return [b.build() for b in groups.values()]


def parse_series_csv(text: str, source: str | None = None) -> list[UtilizationSeries]:
    """Parse delimited text. Line numbers in errors count the header as line 1."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty utilization file", 1, source) from None
    header = [h.strip() for h in header]
    unknown = [h for h in header if h not in COLUMNS]
    if unknown:
        raise DataError(f"unknown column(s) {unknown}", 1, source)
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise DataError(f"missing column(s) {missing}", 1, source)
    if len(set(header)) != len(header):
        raise DataError("duplicate column names", 1, source)

    def rows():
        for values in reader:
            line = reader.line_num
            if not values or all(not v.strip() for v in values):
                continue
            if len(values) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(values)}", line, source)
            yield line, dict(zip(header, values))

    return _collect(rows(), source)


def parse_series_document(doc: Any, source: str | None = None) -> list[UtilizationSeries]:
    """Parse the structured form: a list of row records, or ``{"rows": [...]}``.

    Errors report the 1-based record index in place of a line number.
    """
    if isinstance(doc, Mapping):
        unknown = set(doc) - {"rows"}
        if unknown or "rows" not in doc:
            raise DataError("document must be a list of rows or a mapping with a 'rows' list", None, source)
        doc = doc["rows"]
    if not isinstance(doc, list):
        raise DataError("document must be a list of rows", None, source)

    def rows():
        for i, row in enumerate(doc, start=1):
            if not isinstance(row, Mapping):
                raise DataError("row must be a mapping", i, source)
            unknown = [k for k in row if k not in COLUMNS]
            if unknown:
                raise DataError(f"unknown column(s) {unknown}", i, source)
            yield i, row

    return _collect(rows(), source)


def parse_series(path: str | os.PathLike) -> list[UtilizationSeries]:
    """Read a utilization file; ``.json``/``.yaml``/``.yml`` are parsed as documents."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read utilization file: {exc.strerror or exc}", None, str(path)) from None
    if path.suffix.lower() in {".json", ".yaml", ".yml"}:
        try:
            doc = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
        except (ValueError, yaml.YAMLError) as exc:
            raise DataError(f"malformed document: {exc}", None, str(path)) from None
        return parse_series_document(doc, str(path))
    return parse_series_csv(text, str(path))


def aggregate(series: UtilizationSeries, request: AggregationRequest) -> ResourceReading:
    """Reduce a whole series to one rate: arithmetic mean or nearest-rank percentile."""
    if request.metric != series.metric:
        raise DataError(f"request for {request.metric!r} applied to {series.metric!r} series")
    if len(series) == 0:
        raise DataError(f"empty series for {series.machine_id}/{series.metric}")
    ks = np.array([request.percentile or 50], dtype=np.int64)
    offsets = np.array([0, len(series)], dtype=np.int64)
    means, pct = kernels.segment_stats(np.ascontiguousarray(series.rates, dtype=np.float64), offsets, ks)
    value = means[0] if request.percentile is None else pct[0, 0]
    return ResourceReading(request.name, float(value))


def machine_readings(series: Sequence[UtilizationSeries], specs: Sequence[ResourceSpec]) -> list[ResourceReading]:
    """Readings for every spec of one machine, in spec order.

    ``series`` must all belong to the same machine. A spec whose metric has
    no series is a data error.
    """
    by_metric = {s.metric: s for s in series}
    requests = [AggregationRequest.from_name(spec.name) for spec in specs]
    needed: dict[str, list[int]] = {}
    for req in requests:
        if req.metric not in by_metric:
            machine = series[0].machine_id if series else "?"
            raise DataError(f"machine {machine!r} has no {req.metric!r} series for {req.name!r}")
        if req.percentile is not None:
            needed.setdefault(req.metric, []).append(req.percentile)
        else:
            needed.setdefault(req.metric, [])

    metrics = list(needed)
    for m in metrics:
        if len(by_metric[m]) == 0:
            raise DataError(f"empty series for {by_metric[m].machine_id}/{m}")
    values = np.concatenate([by_metric[m].rates for m in metrics]).astype(np.float64)
    offsets = np.zeros(len(metrics) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(by_metric[m]) for m in metrics])
    all_ks = sorted({k for ks in needed.values() for k in ks}) or [50]
    ks = np.array(all_ks, dtype=np.int64)
    means, pct = kernels.segment_stats(values, offsets, ks)

    row = {m: i for i, m in enumerate(metrics)}
    col = {k: j for j, k in enumerate(all_ks)}
    out = []
    for spec, req in zip(specs, requests):
        i = row[req.metric]
        value = means[i] if req.percentile is None else pct[i, col[req.percentile]]
        out.append(ResourceReading(spec.name, float(value)))
    return out


def group_by_machine(series: Iterable[UtilizationSeries]) -> dict[str, list[UtilizationSeries]]:
    """Series per machine, keyed in first-appearance order."""
    grouped: dict[str, list[UtilizationSeries]] = {}
    for s in series:
        grouped.setdefault(s.machine_id, []).append(s)
    return grouped
