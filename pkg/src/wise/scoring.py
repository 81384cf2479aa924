"""Resource scores, penalty terms and the four WISE machine scores.

A resource is either *target-bearing* (it has a target and a range, so it gets
a z-score and tanh/exp scores) or *penalty-only* (it only has an upper limit).
Penalty-only resources never enter the score sums or the count ``n``; they only
add their penalty term when the limit is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from wise import kernels
from wise.errors import ConfigError, ScoringError

VARIANTS = ("s1", "s2", "s3", "s4")
TANH_VARIANTS = frozenset({"s1", "s2"})

VARIANT_LABELS = {
    "s1": "tanh-l1",
    "s2": "tanh-l2",
    "s3": "exp-l1",
    "s4": "exp-l2",
}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class ResourceSpec:
    """Scoring parameters for one resource aggregate such as ``cpu/p95``.

    ``target``/``range`` are the ideal level and acceptable deviation, in
    percent. ``resource_max`` is the upper limit that triggers the penalty of
    ``penalty_weight``.
    """

    name: str
    target: float | None = None
    range: float | None = None
    weight: float = 1.0
    resource_max: float | None = None
    penalty_weight: float = 1.0

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("resource name must be a non-empty string", "name")
        for attr in ("target", "range", "resource_max"):
            value = getattr(self, attr)
            if value is not None and (not _is_number(value) or not math.isfinite(value)):
                raise ConfigError(f"must be a finite number, got {value!r}", attr)
        for attr in ("weight", "penalty_weight"):
            value = getattr(self, attr)
            if not _is_number(value) or not math.isfinite(value):
                raise ConfigError(f"must be a finite number, got {value!r}", attr)
            if value < 0:
                raise ConfigError(f"must be non-negative, got {value!r}", attr)
        if (self.target is None) != (self.range is None):
            missing = "range" if self.range is None else "target"
            raise ConfigError("target and range must be given together", missing)
        if self.target is not None and not 0 <= self.target <= 100:
            raise ConfigError(f"must lie in [0, 100], got {self.target!r}", "target")
        if self.range is not None and self.range <= 0:
            raise ConfigError(f"must be positive, got {self.range!r}", "range")
        if self.resource_max is not None and not 0 < self.resource_max <= 100:
            raise ConfigError(f"must lie in (0, 100], got {self.resource_max!r}", "resource_max")
        if self.target is None and self.resource_max is None:
            raise ConfigError("resource needs a target or a resource_max", "target")

    @property
    def has_target(self) -> bool:
        return self.target is not None

    @property
    def has_limit(self) -> bool:
        return self.resource_max is not None

    @property
    def metric(self) -> str:
        return self.name.split("/", 1)[0]

    @property
    def aggregation(self) -> str:
        parts = self.name.split("/", 1)
        return parts[1] if len(parts) == 2 else "avg"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "target": self.target,
            "range": self.range,
            "weight": self.weight,
            "resource_max": self.resource_max,
            "penalty_weight": self.penalty_weight,
        }


@dataclass(frozen=True)
class ResourceReading:
    """Aggregated utilization rate of one resource, in percent."""

    name: str
    rate: float


@dataclass(frozen=True)
class ResourceScoreDetail:
    name: str
    z: float | None
    score_tanh: float | None
    score_exp: float | None
    penalty: float
    over_limit: bool
    rate: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "rate": self.rate,
            "z": self.z,
            "score_tanh": self.score_tanh,
            "score_exp": self.score_exp,
            "penalty": self.penalty,
            "over_limit": self.over_limit,
        }


@dataclass(frozen=True)
class ClassificationThresholds:
    """Pass/fail cutoffs. Tanh scores pass at or below, exp scores at or above.

    ``per_variant`` optionally overrides the overall cutoff of single variants,
    e.g. ``{"s4": 0.3}``.
    """

    tanh_overall: float = 0.76
    tanh_resource: float = 0.76
    exp_overall: float = 0.36
    exp_resource: float = 0.36
    per_variant: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for attr in ("tanh_overall", "tanh_resource", "exp_overall", "exp_resource"):
            value = getattr(self, attr)
            if not _is_number(value) or not 0 <= value <= 1:
                raise ConfigError(f"must lie in [0, 1], got {value!r}", f"thresholds.{attr}")
        for key, value in self.per_variant.items():
            if key not in VARIANTS:
                raise ConfigError(f"unknown variant {key!r}", "thresholds.per_variant")
            if not _is_number(value) or not 0 <= value <= 1:
                raise ConfigError(f"must lie in [0, 1], got {value!r}", f"thresholds.per_variant.{key}")

    def overall(self, variant: str) -> float:
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
        if variant in self.per_variant:
            return float(self.per_variant[variant])
        return self.tanh_overall if variant in TANH_VARIANTS else self.exp_overall

    def passes(self, variant: str, score: float) -> bool:
        cutoff = self.overall(variant)
        return score <= cutoff if variant in TANH_VARIANTS else score >= cutoff

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "tanh_overall": self.tanh_overall,
            "tanh_resource": self.tanh_resource,
            "exp_overall": self.exp_overall,
            "exp_resource": self.exp_resource,
        }
        if self.per_variant:
            out["per_variant"] = {k: self.per_variant[k] for k in VARIANTS if k in self.per_variant}
        return out


@dataclass(frozen=True)
class Verdicts:
    """Machine-level pass flags per variant and resource-level pass flags.

    ``resources`` maps a resource name to ``{"tanh": bool, "exp": bool}``.
    """

    machine: Mapping[str, bool]
    resources: Mapping[str, Mapping[str, bool]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "machine": dict(self.machine),
            "resources": {k: dict(v) for k, v in self.resources.items()},
        }


@dataclass(frozen=True)
class MachineScoreReport:
    machine_id: str
    details: tuple[ResourceScoreDetail, ...]
    s1: float
    s2: float
    s3: float
    s4: float
    n_scored: int
    penalty_total: float
    verdicts: Verdicts | None = None
    machine_type: str | None = None

    def score(self, variant: str) -> float:
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
        return getattr(self, variant)

    def detail(self, name: str) -> ResourceScoreDetail:
        for d in self.details:
            if d.name == name:
                return d
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "machine_id": self.machine_id,
            "machine_type": self.machine_type,
            "s1": self.s1,
            "s2": self.s2,
            "s3": self.s3,
            "s4": self.s4,
            "n_scored": self.n_scored,
            "penalty_total": self.penalty_total,
            "details": [d.to_dict() for d in self.details],
            "verdicts": self.verdicts.to_dict() if self.verdicts else None,
        }


# --------------------------------------------------------------------------
# per-resource operations
# --------------------------------------------------------------------------


def z_score(rate: float, spec: ResourceSpec) -> float:
    """Number of ranges between ``rate`` and the spec's target."""
    if not spec.has_target:
        raise ScoringError(f"{spec.name!r} is penalty-only and has no z-score")
    return (rate - spec.target) / spec.range


def score_tanh(z: float) -> float:
    return math.tanh(z)


def score_exp(z: float) -> float:
    return math.exp(-abs(z))


def penalty(rate: float, spec: ResourceSpec) -> float:
    """Weighted unit step: ``penalty_weight`` once ``rate >= resource_max``."""
    if spec.resource_max is None:
        return 0.0
    return float(spec.penalty_weight) if rate - spec.resource_max >= 0 else 0.0


def _check_rate(name: str, rate: float) -> float:
    if not _is_number(rate) or not math.isfinite(rate) or rate < 0:
        raise ScoringError(f"reading {name!r} has invalid rate {rate!r}")
    return float(rate)


def _match_readings(readings: Iterable[ResourceReading], specs: Sequence[ResourceSpec]) -> dict[str, float]:
    names = {s.name for s in specs}
    if len(names) != len(specs):
        raise ConfigError("duplicate resource names in resolved specs")
    rates: dict[str, float] = {}
    for r in readings:
        if r.name not in names:
            raise ConfigError(f"reading {r.name!r} does not match any resource spec")
        if r.name in rates:
            raise ScoringError(f"duplicate reading for {r.name!r}")
        rates[r.name] = _check_rate(r.name, r.rate)
    missing = [s.name for s in specs if s.name not in rates]
    if missing:
        raise ScoringError(f"no reading for resource(s): {', '.join(missing)}")
    if not any(s.has_target for s in specs):
        raise ScoringError("no target-bearing resource to score")
    return rates


def _detail(rate: float, spec: ResourceSpec) -> ResourceScoreDetail:
    pen = penalty(rate, spec)
    over = spec.resource_max is not None and rate >= spec.resource_max
    if spec.has_target:
        z = z_score(rate, spec)
        return ResourceScoreDetail(spec.name, z, score_tanh(z), score_exp(z), pen, over, rate)
    return ResourceScoreDetail(spec.name, None, None, None, pen, over, rate)


# --------------------------------------------------------------------------
# machine scores
# --------------------------------------------------------------------------


def wise_scores(
    readings: Iterable[ResourceReading],
    specs: Sequence[ResourceSpec],
    machine_id: str = "",
    thresholds: ClassificationThresholds | None = None,
    machine_type: str | None = None,
) -> MachineScoreReport:
    """Score one machine.

    Every spec needs exactly one reading and every reading a spec. ``n`` is the
    number of target-bearing specs; the penalty sum runs over every spec with
    a ``resource_max``. Weights are used as given, not renormalized.
    """
    specs = tuple(specs)
    rates = _match_readings(readings, specs)
    details = tuple(_detail(rates[s.name], s) for s in specs)

    n = 0
    l1_tanh = sq_tanh = l1_exp = sq_exp = 0.0
    for spec, d in zip(specs, details):
        if d.z is None:
            continue
        n += 1
        w = spec.weight
        l1_tanh += w * abs(d.score_tanh)
        sq_tanh += (w * d.score_tanh) ** 2
        l1_exp += w * d.score_exp
        sq_exp += (w * d.score_exp) ** 2
    total_pen = sum(d.penalty for d in details)

    report = MachineScoreReport(
        machine_id=machine_id,
        details=details,
        s1=min(l1_tanh / n + total_pen, 1.0),
        s2=min(math.sqrt(sq_tanh) / n + total_pen, 1.0),
        s3=max(l1_exp / n - total_pen, 0.0),
        s4=max(math.sqrt(sq_exp) / n - total_pen, 0.0),
        n_scored=n,
        penalty_total=total_pen,
        machine_type=machine_type,
    )
    return _with_verdicts(report, thresholds or ClassificationThresholds())


def score_fleet(
    machines: Sequence[tuple[str, Iterable[ResourceReading], Sequence[ResourceSpec]]],
    thresholds: ClassificationThresholds | None = None,
    machine_types: Mapping[str, str] | None = None,
) -> list[MachineScoreReport]:
    """Score many machines through the batch kernel.

    ``machines`` holds ``(machine_id, readings, resolved_specs)`` triples; the
    spec sets may differ between machines (per-type overrides). Results match
    :func:`wise_scores` to rounding.
    """
    thresholds = thresholds or ClassificationThresholds()
    machine_types = machine_types or {}
    prepared = []
    columns: dict[str, int] = {}
    for machine_id, readings, specs in machines:
        specs = tuple(specs)
        try:
            rates = _match_readings(readings, specs)
        except (ScoringError, ConfigError) as exc:
            raise type(exc)(f"machine {machine_id!r}: {exc}") from None
        for s in specs:
            columns.setdefault(s.name, len(columns))
        prepared.append((machine_id, specs, rates))
    if not prepared:
        return []

    m, k = len(prepared), len(columns)
    rate_arr = np.zeros((m, k))
    target = np.zeros((m, k))
    spread = np.ones((m, k))
    weight = np.zeros((m, k))
    rmax = np.full((m, k), np.inf)
    alpha = np.zeros((m, k))
    has_target = np.zeros((m, k), dtype=np.bool_)
    has_max = np.zeros((m, k), dtype=np.bool_)
    for i, (_, specs, rates) in enumerate(prepared):
        for s in specs:
            j = columns[s.name]
            rate_arr[i, j] = rates[s.name]
            weight[i, j] = s.weight
            alpha[i, j] = s.penalty_weight
            if s.has_target:
                has_target[i, j] = True
                target[i, j] = s.target
                spread[i, j] = s.range
            if s.has_limit:
                has_max[i, j] = True
                rmax[i, j] = s.resource_max

    z, st, se, pen, scores = kernels.wise_matrix(
        rate_arr, target, spread, weight, rmax, alpha, has_target, has_max
    )

    reports = []
    for i, (machine_id, specs, rates) in enumerate(prepared):
        details = []
        for s in specs:
            j = columns[s.name]
            over = bool(has_max[i, j] and rate_arr[i, j] >= rmax[i, j])
            if s.has_target:
                details.append(ResourceScoreDetail(
                    s.name, float(z[i, j]), float(st[i, j]), float(se[i, j]),
                    float(pen[i, j]), over, rates[s.name],
                ))
            else:
                details.append(ResourceScoreDetail(s.name, None, None, None, float(pen[i, j]), over, rates[s.name]))
        report = MachineScoreReport(
            machine_id=machine_id,
            details=tuple(details),
            s1=float(scores[i, 0]),
            s2=float(scores[i, 1]),
            s3=float(scores[i, 2]),
            s4=float(scores[i, 3]),
            n_scored=int(has_target[i].sum()),
            penalty_total=float(pen[i].sum()),
            machine_type=machine_types.get(machine_id),
        )
        reports.append(_with_verdicts(report, thresholds))
    return reports


def classify(report: MachineScoreReport, thresholds: ClassificationThresholds | None = None) -> Verdicts:
    """Apply the pass/fail cutoffs to a machine and to each of its resources.

    Comparisons are inclusive. A resource at or over its limit fails both
    resource checks; penalty-only resources pass iff they are under the limit.
    """
    thresholds = thresholds or ClassificationThresholds()
    machine = {v: thresholds.passes(v, report.score(v)) for v in VARIANTS}
    resources: dict[str, dict[str, bool]] = {}
    for d in report.details:
        if d.z is None:
            ok = not d.over_limit
            resources[d.name] = {"tanh": ok, "exp": ok}
        else:
            resources[d.name] = {
                "tanh": abs(d.score_tanh) <= thresholds.tanh_resource and not d.over_limit,
                "exp": d.score_exp >= thresholds.exp_resource and not d.over_limit,
            }
    return Verdicts(machine=machine, resources=resources)


def _with_verdicts(report: MachineScoreReport, thresholds: ClassificationThresholds) -> MachineScoreReport:
    return MachineScoreReport(
        machine_id=report.machine_id,
        details=report.details,
        s1=report.s1,
        s2=report.s2,
        s3=report.s3,
        s4=report.s4,
        n_scored=report.n_scored,
        penalty_total=report.penalty_total,
        verdicts=classify(report, thresholds),
        machine_type=report.machine_type,
    )
