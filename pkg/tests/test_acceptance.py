"""Acceptance gate. Each test records one PASS/FAIL line, printed in the run summary."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_force_wise, hinges_by_depth, iqr_survivors, rbo_prefix_sum
from wise import ingestion, pipeline
from wise.cli import main
from wise.scoring import (
    ClassificationThresholds,
    ResourceReading,
    ResourceSpec,
    classify,
    score_fleet,
    wise_scores,
    z_score,
)
from wise.simulator import generate, load_scenario
from wise.validation import BenchmarkRecord, iqr_filter, rank_biased_overlap, tukey_hinges, validate

from conftest import spec_dicts

TANH_1 = 0.76159415595576488812
EXP_M1 = 0.36787944117144232160


def _one_resource(k):
    """Score a single resource at z = k/100 (k/8 and 50 + k/8 are exact in binary)."""
    spec = ResourceSpec("cpu/avg", target=50.0, range=12.5)
    return wise_scores([ResourceReading("cpu/avg", 50.0 + k / 8)], [spec])


def test_c1_equation_fidelity(table1_specs, record):
    rng = np.random.default_rng(1001)
    names = [s.name for s in table1_specs]
    cases = [dict(zip(names, rng.uniform(0, 100, 5).round(3).tolist())) for _ in range(1000)]
    t0 = time.perf_counter()
    got = [wise_scores([ResourceReading(k, v) for k, v in c.items()], table1_specs) for c in cases]
    elapsed = time.perf_counter() - t0
    dicts = spec_dicts(table1_specs)
    worst = max(
        abs(a - b)
        for rep, c in zip(got, cases)
        for a, b in zip((rep.s1, rep.s2, rep.s3, rep.s4), brute_force_wise(c, dicts))
    )
    ok = worst <= 1e-12 and elapsed < 5
    record(1, ok, f"max |err| {worst:.2e} (tol 1e-12), scoring {elapsed:.3f}s (< 5s)")
    assert ok


def test_c2_worked_z_scores(record):
    spec = ResourceSpec("ram/avg", target=50, range=30)
    got = (z_score(80, spec), z_score(20, spec))
    ok = got == (1.0, -1.0)
    record(2, ok, f"z(80)={got[0]!r}, z(20)={got[1]!r}")
    assert ok


def test_c3_threshold_consistency_exact_constants(record):
    thresholds = ClassificationThresholds(TANH_1, TANH_1, EXP_M1, EXP_M1)
    mismatches = []
    for k in range(-300, 301):
        z = k / 100
        verdict = classify(_one_resource(k), thresholds).resources["cpu/avg"]
        inside = abs(z) <= 1
        if abs(abs(z) - 1) <= 1e-9:
            # boundary tolerance: both sides must agree with each other only
            if verdict["tanh"] != verdict["exp"]:
                mismatches.append(z)
            continue
        if not (verdict["tanh"] == verdict["exp"] == inside):
            mismatches.append(z)
    ok = not mismatches
    record(3, ok, f"tanh(1)/exp(-1) cutoffs: tanh pass <=> exp pass <=> |z|<=1 on 601 grid points, "
                  f"mismatches {mismatches[:5]}")
    assert ok


def test_c3_rounded_constants_agree_off_boundary(record):
    thresholds = ClassificationThresholds()  # 0.76 / 0.36
    disagreements = []
    for k in range(-300, 301):
        z = k / 100
        if abs(abs(z) - 1) <= 0.01 + 1e-12:
            continue
        verdict = classify(_one_resource(k), thresholds).resources["cpu/avg"]
        if verdict["tanh"] != verdict["exp"]:
            disagreements.append(z)
    ok = not disagreements
    record("3b", ok, f"0.76/0.36 cutoffs agree outside |z| in [0.99, 1.01]; disagree at {disagreements}")
    assert ok


def test_c4_penalty_saturation(table1_specs, record):
    rng = np.random.default_rng(404)
    limited = [s for s in table1_specs if s.has_limit]
    bad = 0
    machines_seen = 0
    for f in range(200):
        machines = []
        for m in range(int(rng.integers(1, 9))):
            rates = {s.name: float(rng.uniform(0, 100)) for s in table1_specs}
            hit = limited[int(rng.integers(len(limited)))]
            rates[hit.name] = float(rng.uniform(hit.resource_max, 100))
            machines.append((f"f{f}m{m}", [ResourceReading(k, v) for k, v in rates.items()], table1_specs))
        for rep in score_fleet(machines):
            machines_seen += 1
            bad += (rep.s1, rep.s2, rep.s3, rep.s4) != (1.0, 1.0, 0.0, 0.0)
    ok = bad == 0
    record(4, ok, f"200 fleets / {machines_seen} machines with a tripped limit, {bad} not at (1,1,0,0)")
    assert ok


def test_c5_l2_ceiling(record):
    rng = np.random.default_rng(505)
    worst = -math.inf
    for n in range(1, 9):
        specs = [ResourceSpec(f"r{i}/avg", target=float(rng.uniform(0, 100)), range=float(rng.uniform(1, 50)))
                 for i in range(n)]
        for _ in range(250):
            rates = rng.uniform(0, 100, n)
            if rng.random() < 0.2:
                rates = np.array([s.target for s in specs])
            rep = wise_scores([ResourceReading(s.name, float(x)) for s, x in zip(specs, rates)], specs)
            worst = max(worst, rep.s2 - 1 / math.sqrt(n), rep.s4 - 1 / math.sqrt(n))
    ok = worst <= 1e-12
    record(5, ok, f"max(s - 1/sqrt(n)) = {worst:.3e} over n=1..8 (tol 1e-12)")
    assert ok


def test_c6_planted_pipeline(table1, record):
    t0 = time.perf_counter()
    results = {}
    for name in ("steady-cpu", "bursty-cpu"):
        fleet = generate(load_scenario(name))
        reports = pipeline.score_series(ingestion.parse_series_csv(fleet.utilization_csv), table1)
        results[name] = validate(reports, fleet.records, "s1", table1.thresholds)
    elapsed = time.perf_counter() - t0
    steady, bursty = results["steady-cpu"], results["bursty-cpu"]
    ok = (
        steady.precision == 1.0 and steady.recall == 1.0
        and bursty.precision == 1.0 and bursty.recall >= 0.75
        and elapsed < 10
    )
    record(6, ok, f"steady P={steady.precision} R={steady.recall}; bursty P={bursty.precision} "
                  f"R={bursty.recall}; {elapsed:.2f}s (< 10s)")
    assert ok


def test_c7_rbo(record):
    items = [f"i{j}" for j in range(10)]
    same = rank_biased_overlap(items, list(items), 0.9)
    disjoint = rank_biased_overlap(items[:5], items[5:], 0.9)
    swap = rank_biased_overlap(["a", "b", "c"], ["b", "a", "c"], 0.9)
    oracle = rbo_prefix_sum(["a", "b", "c"], ["b", "a", "c"], 0.9)
    ok = same == 1.0 and disjoint == 0.0 and abs(swap - oracle) <= 1e-12
    record(7, ok, f"identical={same!r}, disjoint={disjoint!r}, swap={swap!r} vs oracle {oracle!r}")
    assert ok


def test_c8_iqr_oracle(record):
    rng = np.random.default_rng(808)
    oracle_miss = 0
    not_idempotent = []
    for _ in range(100):
        n = int(rng.integers(4, 13))
        lat = rng.integers(1, 101, n).tolist()
        recs = [BenchmarkRecord(f"i{j}", 1.0, float(x), 1.0) for j, x in enumerate(lat)]
        q = tukey_hinges(lat)
        once = iqr_filter(recs, "latency")
        if (Fraction(q[0]), Fraction(q[1])) != hinges_by_depth(lat) or \
                [r.instance_type for r in once] != [f"i{j}" for j in iqr_survivors(lat)]:
            oracle_miss += 1
        twice = iqr_filter(once, "latency") if len(once) >= 4 else once
        if twice != once:
            not_idempotent.append(sorted(lat))
    ok = oracle_miss == 0 and not not_idempotent
    record(8, ok, f"oracle mismatches {oracle_miss}/100; non-idempotent sets {len(not_idempotent)}/100 "
                  f"{not_idempotent[:2]}")
    assert ok


def test_c9_determinism(tmp_path, record):
    sims_equal = True
    for name in ("steady-cpu", "bursty-cpu", "network-heavy"):
        a, b = tmp_path / f"{name}-a", tmp_path / f"{name}-b"
        assert main(["simulate", name, "--out-dir", str(a)]) == 0
        assert main(["simulate", name, "--out-dir", str(b)]) == 0
        sims_equal &= all((a / p.name).read_bytes() == (b / p.name).read_bytes() for p in a.iterdir())
    src = tmp_path / "steady-cpu-a" / "utilization.csv"
    first, second = tmp_path / "score-1", tmp_path / "score-2"
    main(["score", str(src), "--out-dir", str(first)])
    main(["replay", str(first / "manifest.json"), "--out-dir", str(second)])
    replay_equal = all((first / p.name).read_bytes() == (second / p.name).read_bytes() for p in first.iterdir())
    ok = sims_equal and replay_equal
    record(9, ok, f"simulator reruns identical={sims_equal}, score replay identical={replay_equal}")
    assert ok
