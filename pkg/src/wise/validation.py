"""Compare WISE-predicted optimal instances with a benchmark-derived ground truth.

Ground truth: drop latency outliers, then duration outliers (Tukey fences at
Q3 + 1.5 IQR), then keep instances costing at most 3x the cheapest survivor.
Prediction: machines passing a score cutoff, restricted to 2x the cheapest
passer. The two lists are compared with precision, recall and rank-biased
overlap.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping, NamedTuple, Sequence

from wise.errors import ConfigError, DataError, ValidationSetupError
from wise.scoring import TANH_VARIANTS, VARIANT_LABELS, VARIANTS, ClassificationThresholds, MachineScoreReport

QUARTILE_METHOD = "tukey-hinges"
RBO_MODE = "truncated-normalized"
DEFAULT_RBO_P = 0.9
TRUTH_COST_FACTOR = 3.0
PREDICTED_COST_FACTOR = 2.0
IQR_FACTOR = 1.5

BENCHMARK_COLUMNS = ("instance_type", "duration", "latency", "throughput", "cost")


@dataclass(frozen=True)
class BenchmarkRecord:
    instance_type: str
    duration: float
    latency: float
    cost: float
    throughput: float | None = None

    def __post_init__(self):
        for attr in ("duration", "latency", "cost"):
            value = getattr(self, attr)
            if not math.isfinite(value) or value <= 0:
                raise DataError(f"{self.instance_type}: {attr} must be positive, got {value!r}")


class PrecisionRecall(NamedTuple):
    precision: float
    recall: float
    precision_undefined: bool = False


@dataclass(frozen=True)
class ValidationReport:
    variant: str
    threshold: float
    truth_set: tuple[str, ...]
    predicted_set: tuple[str, ...]
    precision: float
    recall: float
    ranking: float
    precision_undefined: bool = False
    rbo_p: float = DEFAULT_RBO_P
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "function": VARIANT_LABELS[self.variant],
            "threshold": self.threshold,
            "truth_set": list(self.truth_set),
            "predicted_set": list(self.predicted_set),
            "precision": self.precision,
            "recall": self.recall,
            "ranking": self.ranking,
            "precision_undefined": self.precision_undefined,
            "metadata": dict(self.metadata),
        }


# --------------------------------------------------------------------------
# benchmark input
# --------------------------------------------------------------------------


def _positive(raw: str, column: str, line: int, source: str | None) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"{column} must be a number, got {raw!r}", line, source) from None
    if not math.isfinite(value) or value <= 0:
        raise DataError(f"{column} must be positive, got {raw!r}", line, source)
    return value


def parse_benchmarks_csv(text: str, source: str | None = None) -> list[BenchmarkRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty benchmark file", 1, source) from None
    unknown = [h for h in header if h not in BENCHMARK_COLUMNS]
    if unknown:
        raise DataError(f"unknown column(s) {unknown}", 1, source)
    required = [c for c in BENCHMARK_COLUMNS if c != "throughput" and c not in header]
    if required:
        raise DataError(f"missing column(s) {required}", 1, source)

    records: list[BenchmarkRecord] = []
    seen: set[str] = set()
    for values in reader:
        line = reader.line_num
        if not values or all(not v.strip() for v in values):
            continue
        if len(values) != len(header):
            raise DataError(f"expected {len(header)} fields, got {len(values)}", line, source)
        row = {k: v.strip() for k, v in zip(header, values)}
        name = row["instance_type"]
        if not name:
            raise DataError("missing instance_type", line, source)
        if name in seen:
            raise DataError(f"duplicate instance_type {name!r}", line, source)
        seen.add(name)
        throughput = row.get("throughput") or None
        records.append(BenchmarkRecord(
            instance_type=name,
            duration=_positive(row["duration"], "duration", line, source),
            latency=_positive(row["latency"], "latency", line, source),
            cost=_positive(row["cost"], "cost", line, source),
            throughput=_positive(throughput, "throughput", line, source) if throughput else None,
        ))
    return records


def load_benchmarks(path: str | os.PathLike) -> list[BenchmarkRecord]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read benchmark file: {exc.strerror or exc}", None, str(path)) from None
    return parse_benchmarks_csv(text, str(path))


# --------------------------------------------------------------------------
# ground truth
# --------------------------------------------------------------------------


def _median(sorted_values: Sequence[float]) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return sorted_values[mid]
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2


def tukey_hinges(values: Iterable[float]) -> tuple[float, float]:
    """Lower and upper hinge: medians of the lower and upper halves.

    For odd counts the median belongs to both halves.
    """
    v = sorted(values)
    if not v:
        raise ValidationSetupError("no values to compute quartiles from")
    half = (len(v) + 1) // 2
    return _median(v[:half]), _median(v[len(v) - half:])


def iqr_filter(records: Sequence[BenchmarkRecord], metric: str) -> list[BenchmarkRecord]:
    """Drop records whose ``metric`` exceeds ``Q3 + 1.5 * IQR``. Input order is kept."""
    if metric not in ("latency", "duration"):
        raise ConfigError(f"IQR filter metric must be latency or duration, got {metric!r}")
    if len(records) < 4:
        raise ValidationSetupError(f"IQR filter needs at least 4 records, got {len(records)}")
    q1, q3 = tukey_hinges(getattr(r, metric) for r in records)
    fence = q3 + IQR_FACTOR * (q3 - q1)
    return [r for r in records if getattr(r, metric) <= fence]


def ground_truth(records: Sequence[BenchmarkRecord]) -> list[str]:
    """Benchmark-optimal instance types, cheapest first (ties by name).

    Outlier passes are skipped when fewer than four records remain, since
    quartiles of three points say nothing.
    """
    if not records:
        raise ValidationSetupError("no benchmark records")
    survivors = list(records)
    for metric in ("latency", "duration"):
        if len(survivors) >= 4:
            survivors = iqr_filter(survivors, metric)
    if not survivors:
        raise ValidationSetupError("every benchmark record was filtered out")
    cheapest = min(r.cost for r in survivors)
    kept = [r for r in survivors if r.cost <= TRUTH_COST_FACTOR * cheapest]
    kept.sort(key=lambda r: (r.cost, r.instance_type))
    return [r.instance_type for r in kept]


# --------------------------------------------------------------------------
# prediction and metrics
# --------------------------------------------------------------------------


def predicted_set(
    reports: Sequence[MachineScoreReport],
    variant: str,
    thresholds: ClassificationThresholds,
    costs: Mapping[str, float],
) -> list[str]:
    """Machines passing ``variant``'s cutoff within 2x the cheapest passer, best score first."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    missing = [r.machine_id for r in reports if r.machine_id not in costs]
    if missing:
        raise ValidationSetupError(f"no cost for machine(s): {', '.join(missing)}")
    passers = [r for r in reports if thresholds.passes(variant, r.score(variant))]
    if not passers:
        return []
    cheapest = min(costs[r.machine_id] for r in passers)
    kept = [r for r in passers if costs[r.machine_id] <= PREDICTED_COST_FACTOR * cheapest]
    sign = 1.0 if variant in TANH_VARIANTS else -1.0
    kept.sort(key=lambda r: (sign * r.score(variant), costs[r.machine_id], r.machine_id))
    return [r.machine_id for r in kept]


def precision_recall(truth: Iterable[Hashable], predicted: Iterable[Hashable]) -> PrecisionRecall:
    truth, predicted = set(truth), set(predicted)
    if not truth:
        raise ValidationSetupError("ground truth is empty; precision and recall are meaningless")
    hits = len(truth & predicted)
    recall = hits / len(truth)
    if not predicted:
        return PrecisionRecall(0.0, recall, precision_undefined=True)
    return PrecisionRecall(hits / len(predicted), recall)


def rank_biased_overlap(list_a: Sequence[Hashable], list_b: Sequence[Hashable], p: float = DEFAULT_RBO_P) -> float:
    """Rank-biased overlap truncated at the longer list's depth and normalized.

    ``(1 - p) * sum_{d=1..k} p**(d-1) * |A[:d] & B[:d]| / d`` divided by
    ``1 - p**k``, so identical lists score exactly 1. Past the end of the
    shorter list its prefix simply stops growing.
    """
    if not 0 < p < 1:
        raise ConfigError(f"RBO persistence p must lie in (0, 1), got {p!r}")
    for lst in (list_a, list_b):
        if len(set(lst)) != len(lst):
            raise ValidationSetupError("RBO lists must not contain duplicates")
    k = max(len(list_a), len(list_b))
    if k == 0:
        return 1.0
    if list(list_a) == list(list_b):
        return 1.0
    seen_a: set = set()
    seen_b: set = set()
    overlap = 0
    total = 0.0
    weight = 1.0
    for d in range(1, k + 1):
        if d <= len(list_a):
            item = list_a[d - 1]
            seen_a.add(item)
            if item in seen_b:
                overlap += 1
        if d <= len(list_b):
            item = list_b[d - 1]
            seen_b.add(item)
            if item in seen_a:
                overlap += 1
        total += weight * overlap / d
        weight *= p
    return min((1 - p) * total / (1 - p**k), 1.0)


def validate(
    reports: Sequence[MachineScoreReport],
    records: Sequence[BenchmarkRecord],
    variant: str,
    thresholds: ClassificationThresholds | None = None,
    p: float = DEFAULT_RBO_P,
) -> ValidationReport:
    """Run the full comparison for one variant."""
    thresholds = thresholds or ClassificationThresholds()
    truth = ground_truth(records)
    costs = {r.instance_type: r.cost for r in records}
    predicted = predicted_set(reports, variant, thresholds, costs)
    pr = precision_recall(truth, predicted)
    ranking = rank_biased_overlap(truth, predicted, p) if predicted else 0.0
    return ValidationReport(
        variant=variant,
        threshold=thresholds.overall(variant),
        truth_set=tuple(truth),
        predicted_set=tuple(predicted),
        precision=pr.precision,
        recall=pr.recall,
        ranking=ranking,
        precision_undefined=pr.precision_undefined,
        rbo_p=p,
        metadata={
            "quartile_method": QUARTILE_METHOD,
            "iqr_order": ["latency", "duration"],
            "truth_cost_factor": TRUTH_COST_FACTOR,
            "predicted_cost_factor": PREDICTED_COST_FACTOR,
            "rbo_p": p,
            "rbo_mode": RBO_MODE,
            "thresholds": thresholds.to_dict(),
        },
    )
