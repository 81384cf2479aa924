"""Synthetic fleets with planted ground truth.

Each instance belongs to a planted class:

* ``optimal``: every target-bearing aggregate within 0.3 ranges of its target.
* ``under``: aggregates centered ``separation`` ranges below target. These are
  oversized machines, so their benchmark numbers are good but they are priced
  above 3x the cheapest optimal instance and fall out of the cost band.
* ``over``: aggregates centered ``separation`` ranges above target. They run
  slow, so their durations are duration outliers.
* ``limit-breaker``: otherwise optimal, but one limited aggregate sits at or
  above its ``resource_max``. Their latencies are latency outliers.

The generator checks its own output: the benchmark file must reproduce the
planted truth through :func:`wise.validation.ground_truth`, and each
limit-breaker must actually trip its limit. Scenarios that cannot satisfy this
are rejected with :class:`ScenarioError`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from wise import config
from wise.errors import ConfigError, ScenarioError
from wise.ingestion import AggregationRequest, aggregate, UtilizationSeries
from wise.scoring import ResourceSpec
from wise.validation import BenchmarkRecord, ground_truth, parse_benchmarks_csv

GENERATOR_ID = "wise-sim/1"
RNG_ALGORITHM = "numpy.random.PCG64"

WORKLOADS = ("steady-cpu", "bursty-cpu", "network-heavy")
CLASSES = ("optimal", "under", "over", "limit-breaker")

OPTIMAL_JITTER = 0.3  # in ranges
BURST_PERIOD = 20  # samples
BURST_NOISE = 1.5
PENALTY_LEVEL = {"steady-cpu": 0.3, "bursty-cpu": 0.3, "network-heavy": 0.75}
LIMIT_MARGIN = (2.0, 6.0)

# base benchmark levels per workload: (latency ms, duration s, operations)
BENCH_BASE = {
    "steady-cpu": (12.0, 600.0, 1_000_000),
    "bursty-cpu": (18.0, 900.0, 1_000_000),
    "network-heavy": (25.0, 1200.0, 500_000),
}
# (latency factor range, duration factor range)
BENCH_FACTORS = {
    "optimal": ((0.95, 1.15), (0.95, 1.15)),
    "under": ((0.85, 0.95), (0.85, 0.95)),
    "over": ((1.0, 1.2), (3.5, 5.0)),
    "limit-breaker": ((6.0, 9.0), (3.5, 5.0)),
}
BASE_COST = 0.1
# automatic prices: base multiplier and per-instance step, per class
AUTO_COST = {
    "optimal": (1.0, 0.15),
    "under": (4.0, 1.0),
    "over": (0.4, 0.05),
    "limit-breaker": (0.5, 0.05),
}


@dataclass(frozen=True)
class PlantedInstance:
    instance_type: str
    planted_class: str
    cost: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"instance_type": self.instance_type, "class": self.planted_class}
        if self.cost is not None:
            out["cost"] = self.cost
        return out


@dataclass(frozen=True)
class FleetScenario:
    seed: int
    profile: str
    instances: tuple[PlantedInstance, ...]
    duration: int = 288
    burst_duty: float = 0.3
    separation: float = 2.5
    interval: int = 300
    start: int = 1_700_000_000
    scoring_profile: str = config.DEFAULT_PROFILE
    limit_metric: str | None = None
    burst_metric: str = "cpu"
    name: str | None = None

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ScenarioError(f"seed must be a non-negative integer, got {self.seed!r}", "seed")
        if self.profile not in WORKLOADS:
            raise ScenarioError(f"unknown workload profile {self.profile!r}; expected one of {WORKLOADS}", "profile")
        if not 0 < self.burst_duty < 1:
            raise ScenarioError(f"must lie in (0, 1), got {self.burst_duty!r}", "burst_duty")
        if not isinstance(self.duration, int) or self.duration < 1:
            raise ScenarioError(f"must be a positive integer, got {self.duration!r}", "duration")
        if not isinstance(self.interval, int) or self.interval < 1:
            raise ScenarioError(f"must be a positive integer, got {self.interval!r}", "interval")
        if not self.separation > 0:
            raise ScenarioError(f"must be positive, got {self.separation!r}", "separation")
        if not self.instances:
            raise ScenarioError("scenario has no instances", "instances")
        names = [i.instance_type for i in self.instances]
        if len(set(names)) != len(names):
            raise ScenarioError("instance types must be unique", "instances")
        for idx, inst in enumerate(self.instances):
            if inst.planted_class not in CLASSES:
                raise ScenarioError(f"unknown class {inst.planted_class!r}", f"instances[{idx}].class")
            if inst.cost is not None and not inst.cost > 0:
                raise ScenarioError(f"cost must be positive, got {inst.cost!r}", f"instances[{idx}].cost")
        if not any(i.planted_class == "optimal" for i in self.instances):
            raise ScenarioError("scenario needs at least one optimal instance", "instances")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "profile": self.profile,
            "duration": self.duration,
            "burst_duty": self.burst_duty,
            "separation": self.separation,
            "interval": self.interval,
            "start": self.start,
            "scoring_profile": self.scoring_profile,
            "limit_metric": self.limit_metric,
            "burst_metric": self.burst_metric,
            "instances": [i.to_dict() for i in self.instances],
        }


@dataclass
class GeneratedFleet:
    utilization_csv: str
    benchmark_csv: str
    truth: list[str]
    metadata: dict[str, Any]
    records: list[BenchmarkRecord] = field(default_factory=list)

    FILES = ("utilization.csv", "benchmark.csv", "truth.txt", "metadata.json")

    def file_contents(self) -> dict[str, str]:
        return {
            "utilization.csv": self.utilization_csv,
            "benchmark.csv": self.benchmark_csv,
            "truth.txt": "".join(f"{t}\n" for t in self.truth),
            "metadata.json": json.dumps(self.metadata, indent=2) + "\n",
        }

    def write(self, out_dir: str | os.PathLike) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = {}
        for name, text in self.file_contents().items():
            path = out / name
            with open(path, "w", newline="") as fh:
                fh.write(text)
            written[name] = path
        return written


# --------------------------------------------------------------------------
# scenario documents
# --------------------------------------------------------------------------


def parse_scenario(doc: Any) -> FleetScenario:
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a mapping")
    allowed = {
        "name", "seed", "profile", "instances", "duration", "burst_duty", "separation",
        "interval", "start", "scoring_profile", "limit_metric", "burst_metric",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}", "<root>")
    for key in ("seed", "profile", "instances"):
        if key not in doc:
            raise ScenarioError("missing required field", key)
    items = doc["instances"]
    if not isinstance(items, list):
        raise ScenarioError("expected a list", "instances")
    instances = []
    for i, item in enumerate(items):
        if not isinstance(item, Mapping) or "instance_type" not in item or "class" not in item:
            raise ScenarioError("each instance needs instance_type and class", f"instances[{i}]")
        extra = set(item) - {"instance_type", "class", "cost"}
        if extra:
            raise ScenarioError(f"unknown field(s) {sorted(extra)}", f"instances[{i}]")
        cost = item.get("cost")
        instances.append(PlantedInstance(str(item["instance_type"]), str(item["class"]),
                                         float(cost) if cost is not None else None))
    kwargs = {k: doc[k] for k in allowed - {"instances"} if k in doc and doc[k] is not None}
    try:
        return FleetScenario(instances=tuple(instances), **kwargs)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def bundled_scenarios() -> list[str]:
    root = importlib_resources.files("wise") / "scenarios"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(name_or_path: str | os.PathLike) -> FleetScenario:
    """Load a scenario from a YAML/JSON file or by bundled name (``steady-cpu`` ...)."""
    path = Path(name_or_path)
    if path.suffix in {".yaml", ".yml", ".json"} or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc.strerror or exc}", str(path)) from None
    else:
        res = importlib_resources.files("wise") / "scenarios" / f"{name_or_path}.yaml"
        if not res.is_file():
            raise ScenarioError(f"no bundled scenario named {name_or_path!r}")
        text = res.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from None
    return parse_scenario(doc)


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------


def _assign_costs(scenario: FleetScenario) -> dict[str, float]:
    counters = {c: 0 for c in CLASSES}
    costs = {}
    for inst in scenario.instances:
        if inst.cost is not None:
            costs[inst.instance_type] = float(inst.cost)
        else:
            base, step = AUTO_COST[inst.planted_class]
            costs[inst.instance_type] = round(BASE_COST * (base + step * counters[inst.planted_class]), 4)
        counters[inst.planted_class] += 1
    return costs


def _limit_spec(specs: Sequence[ResourceSpec], scenario: FleetScenario) -> ResourceSpec:
    limited = [s for s in specs if s.has_limit]
    if not limited:
        raise ScenarioError("scoring profile has no resource_max to break", "scoring_profile")
    if scenario.limit_metric is not None:
        for s in limited:
            if s.name == scenario.limit_metric:
                return s
        raise ScenarioError(f"{scenario.limit_metric!r} has no resource_max in the profile", "limit_metric")
    if scenario.profile == "network-heavy":
        penalty_only = [s for s in limited if not s.has_target]
        if penalty_only:
            return penalty_only[0]
    return limited[0]


def _centers(
    specs: Sequence[ResourceSpec],
    planted_class: str,
    limit: ResourceSpec,
    scenario: FleetScenario,
    rng: np.random.Generator,
) -> dict[str, float]:
    """Desired value of every aggregate for one instance."""
    sep = scenario.separation
    centers = {}
    for s in specs:
        if planted_class == "limit-breaker" and s.name == limit.name:
            c = s.resource_max + rng.uniform(*LIMIT_MARGIN)
        elif s.has_target:
            if planted_class == "under":
                c = s.target - sep * s.range
            elif planted_class == "over":
                c = s.target + sep * s.range
            else:
                c = s.target + rng.uniform(-OPTIMAL_JITTER, OPTIMAL_JITTER) * s.range
        else:
            level = PENALTY_LEVEL[scenario.profile]
            c = s.resource_max * (level + rng.uniform(-0.05, 0.05))
        centers[s.name] = float(np.clip(c, 0.0, 100.0))
    return centers


def _metric_plan(specs: Sequence[ResourceSpec]) -> dict[str, list[AggregationRequest]]:
    plan: dict[str, list[AggregationRequest]] = {}
    for s in specs:
        req = AggregationRequest.from_name(s.name)
        plan.setdefault(req.metric, []).append(req)
    return plan


def _shape_targets(reqs: Sequence[AggregationRequest], centers: Mapping[str, float]) -> tuple[float, int | None, float | None]:
    """Mean, percentile rank and percentile value a series should hit."""
    avg = next((centers[r.name] for r in reqs if r.percentile is None), None)
    pcts = sorted((r.percentile, centers[r.name]) for r in reqs if r.percentile is not None)
    if not pcts:
        return avg, None, None
    k, q = pcts[-1]
    if avg is None:
        avg = max(q - 8.0, 0.0)
    return avg, k, max(q, avg)


def _steady(rng: np.random.Generator, n: int, mean: float, k: int | None, q: float | None) -> np.ndarray:
    """Noise rescaled so the sample mean is ``mean`` and the k-th percentile ``q`` (before clipping)."""
    noise = rng.standard_normal(n)
    noise -= noise.mean()
    unit = noise / (noise.std() or 1.0)
    if k is None or q is None:
        return mean + 3.0 * unit
    ref = np.sort(noise)[(k * n + 99) // 100 - 1]
    if q - mean <= 1e-9 or ref <= 1e-9:
        return mean + 0.5 * unit
    return mean + (q - mean) * noise / ref


def _bursty(rng: np.random.Generator, n: int, mean: float, k: int | None, q: float | None, duty: float) -> np.ndarray:
    burst_len = max(1, int(round(duty * BURST_PERIOD)))
    mask = np.zeros(n, dtype=bool)
    for start in range(0, n, BURST_PERIOD):
        offset = int(rng.integers(0, BURST_PERIOD - burst_len + 1))
        mask[start + offset: min(start + offset + burst_len, n)] = True
    d = mask.mean() if mask.any() else duty
    high = q if q is not None else min(mean * 1.8, 100.0)
    low = max((mean - d * high) / (1 - d), 0.0) if d < 1 else high
    return np.where(mask, high, low) + BURST_NOISE * rng.standard_normal(n)


def _format_rate(x: float) -> str:
    return f"{x:.3f}"


def generate(scenario: FleetScenario, profile: config.ScoringProfile | None = None) -> GeneratedFleet:
    """Deterministically generate utilization, benchmark and truth for a scenario."""
    if profile is None:
        try:
            profile, _ = config.find_profile(scenario.scoring_profile)
        except ConfigError as exc:
            raise ScenarioError(f"cannot load scoring profile: {exc}", "scoring_profile") from None
    rng = np.random.default_rng(scenario.seed)
    costs = _assign_costs(scenario)
    lat0, dur0, ops = BENCH_BASE[scenario.profile]

    util_lines = ["machine_id,machine_type,metric,timestamp,rate"]
    bench_lines = ["instance_type,duration,latency,throughput,cost"]
    timestamps = scenario.start + scenario.interval * np.arange(scenario.duration, dtype=np.int64)
    limit_rates: dict[str, tuple[ResourceSpec, list[float]]] = {}

    for inst in scenario.instances:
        specs = config.resolve(profile, inst.instance_type)
        limit = _limit_spec(specs, scenario)
        centers = _centers(specs, inst.planted_class, limit, scenario, rng)
        for metric, reqs in _metric_plan(specs).items():
            mean, k, q = _shape_targets(reqs, centers)
            if scenario.profile == "bursty-cpu" and metric == scenario.burst_metric:
                values = _bursty(rng, scenario.duration, mean, k, q, scenario.burst_duty)
            else:
                values = _steady(rng, scenario.duration, mean, k, q)
            values = np.clip(values, 0.0, 100.0)
            text_values = [_format_rate(v) for v in values]
            if inst.planted_class == "limit-breaker" and metric == limit.metric:
                limit_rates[inst.instance_type] = (limit, [float(v) for v in text_values])
            for ts, v in zip(timestamps.tolist(), text_values):
                util_lines.append(f"{inst.instance_type},{inst.instance_type},{metric},{ts},{v}")

        lat_f, dur_f = BENCH_FACTORS[inst.planted_class]
        latency = lat0 * rng.uniform(*lat_f)
        duration = dur0 * rng.uniform(*dur_f)
        bench_lines.append(
            f"{inst.instance_type},{duration:.3f},{latency:.3f},{ops / duration:.3f},{costs[inst.instance_type]:.4f}"
        )

    for name, (spec, rates) in limit_rates.items():
        series = UtilizationSeries(name, name, spec.metric, np.arange(len(rates)), np.asarray(rates))
        reading = aggregate(series, AggregationRequest.from_name(spec.name))
        if reading.rate < spec.resource_max:
            raise ScenarioError(f"limit-breaker {name!r} stays under {spec.name} limit ({reading.rate:.3f})")

    benchmark_csv = "\n".join(bench_lines) + "\n"
    records = parse_benchmarks_csv(benchmark_csv, "benchmark.csv")
    planted = sorted(
        (i.instance_type for i in scenario.instances if i.planted_class == "optimal"),
        key=lambda t: (costs[t], t),
    )
    derived = ground_truth(records)
    if derived != planted:
        raise ScenarioError(
            f"benchmark ground truth {derived} does not match planted optimal set {planted}; "
            "check class counts and costs"
        )

    metadata = {
        "generator": GENERATOR_ID,
        "rng": RNG_ALGORITHM,
        "seed": scenario.seed,
        "scenario": scenario.to_dict(),
        "scoring_profile": profile.name,
        "costs": costs,
        "classes": {i.instance_type: i.planted_class for i in scenario.instances},
        "files": list(GeneratedFleet.FILES),
    }
    return GeneratedFleet(
        utilization_csv="\n".join(util_lines) + "\n",
        benchmark_csv=benchmark_csv,
        truth=planted,
        metadata=metadata,
        records=records,
    )
