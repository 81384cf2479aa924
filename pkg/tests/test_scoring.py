import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ON_TARGET, readings, spec_dicts
from oracles import brute_force_wise
from wise.errors import ConfigError, ScoringError
from wise.scoring import (
    ClassificationThresholds,
    MachineScoreReport,
    ResourceScoreDetail,
    ResourceSpec,
    classify,
    penalty,
    score_exp,
    score_fleet,
    score_tanh,
    wise_scores,
    z_score,
)

TANH_1 = 0.76159415595576488812  # 40-digit oracle, see oracles.tanh_hp
EXP_M1 = 0.36787944117144232160  # 40-digit oracle, see oracles.exp_neg_abs_hp
MEM = ResourceSpec("ram/avg", target=50, range=30, resource_max=90)


class TestResourceSpec:
    def test_penalty_only(self):
        s = ResourceSpec("net/avg", resource_max=80)
        assert not s.has_target and s.has_limit

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"target": 40}, "range"),
            ({"range": 10}, "target"),
            ({"target": 40, "range": 0}, "range"),
            ({"target": 40, "range": 10, "weight": -1}, "weight"),
            ({"target": 40, "range": 10, "penalty_weight": -0.5}, "penalty_weight"),
            ({}, "target"),
            ({"target": 140, "range": 10}, "target"),
            ({"resource_max": 0}, "resource_max"),
        ],
    )
    def test_invalid(self, kwargs, field):
        with pytest.raises(ConfigError) as exc:
            ResourceSpec("x", **kwargs)
        assert exc.value.path == field

    def test_metric_and_aggregation(self):
        s = ResourceSpec("cpu/p95", target=70, range=20)
        assert (s.metric, s.aggregation) == ("cpu", "p95")


class TestZScore:
    def test_worked_examples(self):
        assert z_score(80, MEM) == 1.0
        assert z_score(20, MEM) == -1.0

    def test_on_target(self):
        assert z_score(40, ResourceSpec("cpu/avg", target=40, range=30)) == 0.0

    def test_penalty_only_rejected(self):
        with pytest.raises(ScoringError):
            z_score(50, ResourceSpec("net/avg", resource_max=80))


class TestScoreFunctions:
    def test_tanh(self):
        assert score_tanh(0) == 0.0
        assert score_tanh(1) == pytest.approx(TANH_1, abs=1e-15)
        assert score_tanh(-1) == -score_tanh(1)

    def test_exp(self):
        assert score_exp(0) == 1.0
        assert score_exp(1) == pytest.approx(EXP_M1, abs=1e-15)
        assert score_exp(-1) == score_exp(1)

    @given(st.floats(-50, 50))
    def test_ranges(self, z):
        assert -1 <= score_tanh(z) <= 1
        assert 0 < score_exp(z) <= 1
        assert score_exp(0.0) == 1.0
        if abs(z) > 1e-15:
            assert score_exp(z) < 1


class TestPenalty:
    def test_over(self):
        assert penalty(95, MEM) == 1.0

    def test_under(self):
        assert penalty(89.9, MEM) == 0.0

    def test_boundary_counts(self):
        spec = ResourceSpec("ram/avg", target=50, range=30, resource_max=90, penalty_weight=0.5)
        assert penalty(90, spec) == 0.5

    def test_no_limit(self):
        assert penalty(100, ResourceSpec("cpu/avg", target=40, range=30)) == 0.0


class TestWiseScores:
    def test_all_on_target(self, table1_specs):
        r = wise_scores(readings(ON_TARGET), table1_specs)
        assert (r.s1, r.s2, r.s3) == (0.0, 0.0, 1.0)
        assert r.s4 == 0.5
        assert r.n_scored == 4

    def test_penalty_saturates(self, table1_specs):
        r = wise_scores(readings({**ON_TARGET, "ram/avg": 95}), table1_specs)
        assert (r.s1, r.s2, r.s3, r.s4) == (1.0, 1.0, 0.0, 0.0)
        assert r.detail("ram/avg").over_limit
        assert r.penalty_total == 1.0

    def test_single_deviation(self, table1_specs):
        r = wise_scores(readings({**ON_TARGET, "cpu/avg": 70}), table1_specs)
        assert r.s1 == pytest.approx(0.1903985389889412, abs=1e-15)

    def test_penalty_only_resource_detail(self, table1_specs):
        r = wise_scores(readings(ON_TARGET), table1_specs)
        net = r.detail("net/avg")
        assert net.z is None and net.score_tanh is None and net.score_exp is None
        assert net.penalty == 0.0 and not net.over_limit

    def test_penalty_only_limit_counts(self, table1_specs):
        r = wise_scores(readings({**ON_TARGET, "net/avg": 80}), table1_specs)
        assert r.s1 == 1.0 and r.s3 == 0.0

    def test_unmatched_reading(self, table1_specs):
        with pytest.raises(ConfigError):
            wise_scores(readings({**ON_TARGET, "disk/avg": 10}), table1_specs)

    def test_missing_reading(self, table1_specs):
        values = dict(ON_TARGET)
        del values["cpu/p95"]
        with pytest.raises(ScoringError, match="cpu/p95"):
            wise_scores(readings(values), table1_specs)

    def test_no_target_bearing(self):
        with pytest.raises(ScoringError):
            wise_scores(readings({"net/avg": 10}), [ResourceSpec("net/avg", resource_max=80)])

    def test_negative_rate_rejected(self, table1_specs):
        with pytest.raises(ScoringError):
            wise_scores(readings({**ON_TARGET, "cpu/avg": -1}), table1_specs)

    def test_rates_above_100_accepted(self):
        spec = ResourceSpec("cpu/avg", target=100, range=50)
        assert wise_scores(readings({"cpu/avg": 150}), [spec]).s1 == pytest.approx(math.tanh(1))

    def test_weights_not_renormalized(self):
        specs = [ResourceSpec("a", target=50, range=10, weight=2), ResourceSpec("b", target=50, range=10, weight=2)]
        r = wise_scores(readings({"a": 50, "b": 50}), specs)
        # (1/n) * sum(w) = 2: the exp variants are only clamped from below
        assert r.s3 == 2.0
        assert r.s4 == pytest.approx(math.sqrt(8) / 2)

    def test_alpha_below_one_is_literal(self, table1_specs):
        specs = [s if s.name != "ram/avg" else ResourceSpec("ram/avg", 50, 20, 1, 90, 0.25) for s in table1_specs]
        r = wise_scores(readings({**ON_TARGET, "ram/avg": 95}), specs)
        z = (95 - 50) / 20
        assert r.s1 == pytest.approx(math.tanh(z) / 4 + 0.25)


class TestClassify:
    def _report(self, **scores):
        base = dict(s1=0.0, s2=0.0, s3=1.0, s4=1.0)
        base.update(scores)
        return MachineScoreReport("m", (), n_scored=1, penalty_total=0.0, **base)

    def test_best_tanh_passes(self):
        assert classify(self._report(s1=0.0)).machine["s1"]

    def test_exp_threshold_inclusive(self):
        assert classify(self._report(s3=0.36)).machine["s3"]
        assert not classify(self._report(s3=0.3599)).machine["s3"]

    def test_tanh_threshold_inclusive(self):
        assert classify(self._report(s2=0.76)).machine["s2"]
        assert not classify(self._report(s2=0.7601)).machine["s2"]

    def test_resource_can_fail_while_machine_passes(self):
        details = (
            ResourceScoreDetail("cpu/avg", 1.1, 0.8, math.exp(-1.1), 0.0, False),
            ResourceScoreDetail("ram/avg", 0.0, 0.0, 1.0, 0.0, False),
        )
        report = MachineScoreReport("m", details, 0.4, 0.4, 0.8, 0.6, 2, 0.0)
        v = classify(report)
        assert v.machine["s1"]
        assert not v.resources["cpu/avg"]["tanh"]
        assert v.resources["ram/avg"]["tanh"]

    def test_penalty_only_resource_verdict(self, table1_specs):
        ok = wise_scores(readings(ON_TARGET), table1_specs)
        bad = wise_scores(readings({**ON_TARGET, "net/avg": 85}), table1_specs)
        assert ok.verdicts.resources["net/avg"] == {"tanh": True, "exp": True}
        assert bad.verdicts.resources["net/avg"] == {"tanh": False, "exp": False}

    def test_per_variant_override(self):
        t = ClassificationThresholds(per_variant={"s4": 0.3})
        assert t.overall("s4") == 0.3 and t.overall("s3") == 0.36
        assert classify(self._report(s4=0.31), t).machine["s4"]

    def test_bad_threshold(self):
        with pytest.raises(ConfigError):
            ClassificationThresholds(exp_overall=1.5)


# --------------------------------------------------------------------------
# properties
# --------------------------------------------------------------------------

rates = st.floats(0, 100, allow_nan=False)


def _specs_strategy():
    target_spec = st.builds(
        lambda t, r, w, m, a: (t, r, w, m, a),
        st.floats(0, 100),
        st.floats(0.5, 60),
        st.floats(0, 2),
        st.one_of(st.none(), st.floats(1, 100)),
        st.floats(0, 3),
    )
    return st.lists(target_spec, min_size=1, max_size=6)


class TestProperties:
    @given(_specs_strategy(), st.data())
    @settings(max_examples=200, deadline=None)
    def test_bounds_and_oracle(self, params, data):
        specs = [ResourceSpec(f"r{i}", t, r, w, m, a) for i, (t, r, w, m, a) in enumerate(params)]
        values = {s.name: data.draw(rates) for s in specs}
        rep = wise_scores(readings(values), specs)
        expected = brute_force_wise(values, spec_dicts(specs))
        assert (rep.s1, rep.s2, rep.s3, rep.s4) == pytest.approx(expected, abs=1e-12)
        assert 0 <= rep.s1 <= 1 and 0 <= rep.s2 <= 1 and rep.s3 >= 0 and rep.s4 >= 0
        if all(s.weight <= 1 for s in specs):
            assert rep.s3 <= 1 and rep.s4 <= 1

    @given(st.floats(0, 100), st.floats(1, 50), st.floats(0, 100), st.floats(0, 100))
    def test_monotone_degradation(self, mu, sigma, a, b):
        spec = ResourceSpec("r", mu, sigma)
        d_a, d_b = abs(a - mu), abs(b - mu)
        if d_a == d_b:
            return
        near, far = (a, b) if d_a < d_b else (b, a)
        r_near = wise_scores(readings({"r": near}), [spec])
        r_far = wise_scores(readings({"r": far}), [spec])
        # strictness is limited by float saturation of tanh/exp far from target
        assert r_far.s1 >= r_near.s1 and r_far.s2 >= r_near.s2
        assert r_far.s3 <= r_near.s3 and r_far.s4 <= r_near.s4
        if abs(far - mu) / sigma < 15:
            assert r_far.s1 > r_near.s1 and r_far.s3 < r_near.s3

    @given(st.lists(st.tuples(st.floats(10, 90), st.floats(1, 40), st.floats(0, 10)), min_size=1, max_size=6))
    def test_symmetry_about_target(self, items):
        specs = [ResourceSpec(f"r{i}", mu, sg) for i, (mu, sg, _) in enumerate(items)]
        up = {f"r{i}": min(mu + off, 100.0) for i, (mu, _, off) in enumerate(items)}
        down = {k: 2 * s.target - up[k] for k, s in zip(up, specs)}
        if any(not 0 <= v <= 100 for v in down.values()):
            return
        a = wise_scores(readings(up), specs)
        b = wise_scores(readings(down), specs)
        assert (a.s1, a.s2, a.s3, a.s4) == pytest.approx((b.s1, b.s2, b.s3, b.s4), abs=1e-12)
        for da, db in zip(a.details, b.details):
            assert da.score_tanh == pytest.approx(-db.score_tanh, abs=1e-12)

    @given(st.integers(1, 8), st.data())
    @settings(deadline=None)
    def test_l2_ceiling(self, n, data):
        specs = [ResourceSpec(f"r{i}", data.draw(st.floats(0, 100)), data.draw(st.floats(1, 50))) for i in range(n)]
        rep = wise_scores(readings({s.name: data.draw(rates) for s in specs}), specs)
        assert rep.s2 <= 1 / math.sqrt(n) + 1e-12
        assert rep.s4 <= 1 / math.sqrt(n) + 1e-12

    @given(st.floats(-3, 3))
    def test_threshold_consistency(self, z):
        if abs(abs(z) - 1) < 1e-9:
            return
        t = ClassificationThresholds(tanh_resource=math.tanh(1), exp_resource=math.exp(-1))
        spec = ResourceSpec("r", 50, 10)
        rep = wise_scores(readings({"r": 50 + 10 * z}), [spec], thresholds=t)
        v = rep.verdicts.resources["r"]
        assert v["tanh"] == v["exp"] == (abs(z) <= 1)

    def test_oracle_grid(self, table1_specs):
        # exhaustive over a 1%-step grid for a 3-resource fleet slice
        specs = [s for s in table1_specs if s.name in ("cpu/avg", "ram/avg", "net/avg")]
        grid = np.arange(0, 101, 1.0)
        rng = np.random.default_rng(7)
        for cpu in grid:
            for ram in rng.choice(grid, 6):
                for net in (0.0, 79.0, 80.0, 100.0):
                    values = {"cpu/avg": cpu, "ram/avg": ram, "net/avg": net}
                    rep = wise_scores(readings(values), specs)
                    exp = brute_force_wise(values, spec_dicts(specs))
                    assert (rep.s1, rep.s2, rep.s3, rep.s4) == pytest.approx(exp, abs=1e-12)


class TestScoreFleet:
    def test_matches_single_machine_path(self, table1_specs):
        rng = np.random.default_rng(3)
        machines = []
        for i in range(50):
            vals = {s.name: float(rng.uniform(0, 100)) for s in table1_specs}
            machines.append((f"m{i}", readings(vals), table1_specs))
        fleet = score_fleet(machines)
        for (mid, rd, specs), rep in zip(machines, fleet):
            ref = wise_scores(rd, specs, machine_id=mid)
            assert rep.machine_id == mid
            assert (rep.s1, rep.s2, rep.s3, rep.s4) == pytest.approx((ref.s1, ref.s2, ref.s3, ref.s4), abs=1e-12)
            assert rep.verdicts == ref.verdicts
            for a, b in zip(rep.details, ref.details):
                assert a.name == b.name and a.over_limit == b.over_limit and a.penalty == b.penalty
                if b.z is None:
                    assert a.z is None
                else:
                    assert a.z == pytest.approx(b.z, abs=1e-12)

    def test_heterogeneous_spec_sets(self, table1_specs):
        extra = (*table1_specs, ResourceSpec("disk/avg", 30, 10))
        m1 = ("a", readings(ON_TARGET), table1_specs)
        m2 = ("b", readings({**ON_TARGET, "disk/avg": 40}), extra)
        ra, rb = score_fleet([m1, m2])
        assert ra.n_scored == 4 and rb.n_scored == 5
        assert rb.s1 == pytest.approx(math.tanh(1) / 5)

    def test_errors_name_machine(self, table1_specs):
        with pytest.raises(ScoringError, match="'bad'"):
            score_fleet([("bad", readings({"cpu/avg": 1}), table1_specs)])
