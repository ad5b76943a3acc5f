import dataclasses
import json
import math

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from flowplan.optimizer import (
    Demand,
    DeploymentPlan,
    InstanceError,
    OptimizationInstance,
    diagnose,
    filter_feasible,
    instance_from_dict,
    instance_to_dict,
    plan_report,
    solve,
    validate_plan,
)
from flowplan.oracle import random_instance
from flowplan.profiles import ResourceType, estimate_request_latency
from flowplan.scenario import default_scenario

from conftest import acc_slo, cost_slo, lat_slo, make_config, make_model, make_resources, small_instance

seeds = st.integers(0, 10_000)
slow = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def two_config_instance(slo, configs=None, model=None):
    configs = configs or [make_config(cid="hi", accuracy=0.662, p95=600), make_config(cid="lo", accuracy=0.614, p95=600)]
    return OptimizationInstance(configs, [model or make_model()], make_resources(),
                                [Demand("w", "s", slo, 1.0, 0.5)])


# -- filtering -----------------------------------------------------------------


def test_accuracy_filter_keeps_only_qualifying_config():
    keys = filter_feasible(two_config_instance(acc_slo(0.64)))
    assert [k[2] for k in keys] == ["hi"]


def test_latency_filter_drops_slow_tuple():
    inst = two_config_instance(lat_slo(30.0), [make_config(p95=600)], make_model(ttft=0.2, tpot=0.0624))
    assert filter_feasible(inst) == []
    assert "latency" in diagnose(inst)["w/s"]


def test_zero_accuracy_threshold_keeps_everything():
    assert len(filter_feasible(two_config_instance(acc_slo(0.0)))) == 2


def test_accuracy_floor_applies_to_latency_pairs():
    inst = two_config_instance(lat_slo(1e9, floor=0.63))
    assert [k[2] for k in filter_feasible(inst)] == ["hi"]


# -- solve -----------------------------------------------------------------------


def test_two_instances_needed(n2_instance):
    plan = solve(n2_instance)
    assert plan.status == "optimal"
    assert plan.instance_counts == {"M@A100x4": 2}
    assert plan.objective_value == pytest.approx(2 * 0.3 * 4)
    assert validate_plan(n2_instance, plan) == []


def test_zero_demand_gives_empty_plan():
    plan = solve(small_instance(peak=0.0, avg=0.0))
    assert plan.status == "optimal"
    assert all(n == 0 for n in plan.instance_counts.values())
    assert plan.objective_value == 0


def test_empty_budget_is_infeasible():
    plan = solve(small_instance(budgets={"A100": 0}))
    assert plan.status == "infeasible"


def test_unadmissible_pair_is_infeasible_with_diagnosis():
    inst = small_instance()
    inst = inst.replace(demands=[dataclasses.replace(inst.demands[0], slo=acc_slo(0.9))])
    plan = solve(inst)
    assert plan.status == "infeasible" and "accuracy" in plan.diagnosis["w/acc"]


def test_shared_pool_on_identical_pairs():
    # each pair needs 0.6 instance of capacity at the buffered peak
    peak = 0.6 * 700 / (800 * 1.15)
    demands = [Demand("w", s, acc_slo(0.64), peak, peak / 2) for s in ("a", "b")]
    inst = small_instance().replace(demands=demands)
    joint = solve(inst)
    split = solve(inst.replace(mode="per_pair"))
    assert sum(joint.instance_counts.values()) == 2
    assert sum(split.instance_counts.values()) == 2
    assert joint.objective_value <= split.objective_value + 1e-9
    assert validate_plan(inst.replace(mode="per_pair"), split) == []


def test_shared_pool_strictly_better_with_multiplexing_headroom():
    peak = 0.4 * 700 / (800 * 1.15)
    demands = [Demand("w", s, acc_slo(0.64), peak, peak / 2) for s in ("a", "b")]
    inst = small_instance().replace(demands=demands)
    assert sum(solve(inst).instance_counts.values()) == 1
    assert sum(solve(inst.replace(mode="per_pair")).instance_counts.values()) == 2


def test_cost_slo_limits_spend():
    configs = [make_config(cid="cheap", accuracy=0.6, p95=100, models=("S",)),
               make_config(cid="dear", accuracy=0.7, p95=2000, models=("M",))]
    models = [make_model(), make_model("S", g=1, energy_rate=5.0)]
    inst = OptimizationInstance(configs, models, make_resources(), [Demand("w", "c", cost_slo(1e-3), 1.0, 1.0)],
                                objective="max_accuracy_under_budget")
    plan = solve(inst)
    assert plan.status == "optimal" and validate_plan(inst, plan) == []
    spend = sum(x * inst.unit_cost(inst.config(k[0], k[2]), inst.model(k[3])) for k, x in plan.alloc_avg.items())
    assert spend <= inst.cost_budget() * (1 + 1e-9)


def test_bnb_backend_agrees():
    for seed in range(20):
        inst = random_instance(seed)
        a, b = solve(inst), solve(inst.replace(backend="bnb"))
        assert a.status == b.status
        if a.status == "optimal":
            assert b.objective_value == pytest.approx(a.objective_value, rel=1e-6, abs=1e-9)


def test_external_model_priced_per_token():
    # an API model: one-unit slices of 100 tps on an uncapped resource, billed per token
    price, slice_tps = 2e-6, 100.0
    resources = {**make_resources(), "EXTERNAL": ResourceType("EXTERNAL", price * slice_tps, math.inf, 0.0)}
    api = make_model("Api", "EXTERNAL", g=1, theta=slice_tps, power=0.0, idle=0.0)
    configs = [make_config(cid="local", accuracy=0.66), make_config(cid="api", accuracy=0.9, p95=500, models=("Api",))]
    inst = OptimizationInstance(configs, [make_model(), api], resources, [Demand("w", "s", acc_slo(0.8), 2.0, 1.0)],
                                objective="min_cost")
    plan = solve(inst)
    assert plan.instance_counts == {"M@A100x4": 0, "Api@EXTERNALx1": 10}
    assert plan.objective_value == pytest.approx(2.0 * 500 * price)
    assert validate_plan(inst, plan) == []


# -- validation and reporting --------------------------------------------------


def test_undersized_plan_reports_capacity(n2_instance):
    plan = solve(n2_instance)
    bad = dataclasses.replace(plan, instance_counts={"M@A100x4": 1})
    [v] = validate_plan(n2_instance, bad)
    assert v.constraint_id == "capacity" and v.slack == pytest.approx(100.0)


def test_short_peak_allocation(n2_instance):
    key = ("w", "acc", "c", "M@A100x4")
    plan = DeploymentPlan("optimal", {"M@A100x4": 2}, {key: 0.9}, {key: 0.5})
    [v] = validate_plan(n2_instance, plan)
    assert v.constraint_id == "demand_peak" and v.slack == pytest.approx(-0.1)


def test_inadmissible_allocation_flagged(n2_instance):
    inst = n2_instance.replace(demands=[dataclasses.replace(n2_instance.demands[0], slo=acc_slo(0.7))])
    key = ("w", "acc", "c", "M@A100x4")
    plan = DeploymentPlan("optimal", {"M@A100x4": 2}, {key: 1.0}, {key: 0.5})
    assert [v.constraint_id for v in validate_plan(inst, plan)] == ["slo_accuracy"]


def test_plan_report_units(n2_instance):
    report = plan_report(n2_instance, solve(n2_instance))
    assert report.gpus_by_type["A100"] == 8
    assert report.energy_rate == pytest.approx(2.4)
    assert report.mean_accuracy == pytest.approx(0.662)


def test_empty_plan_report(n2_instance):
    report = plan_report(n2_instance, DeploymentPlan("optimal", {}))
    assert all(v == 0 for v in report.gpus_by_type.values())
    assert report.energy_rate == report.cost_rate == report.mean_accuracy == 0


def test_bundled_scenario_joint_no_worse():
    sc = default_scenario()
    demand = {("video_qa", "accuracy-good"): (3.15, 2.1), ("video_qa", "latency-good"): (1.35, 0.9),
              ("code_gen", "accuracy-good"): (0.525, 0.35), ("code_gen", "latency-good"): (0.225, 0.15)}
    joint = plan_report(sc.instance(demand, "min_cost"), solve(sc.instance(demand, "min_cost")))
    inst = sc.instance(demand, "min_cost", "per_pair")
    split = plan_report(inst, solve(inst))
    assert sum(joint.gpus_by_type.values()) <= sum(split.gpus_by_type.values())
    assert joint.cost_rate < split.cost_rate


# -- serialization and invariants ----------------------------------------------


def test_instance_and_plan_round_trip(n2_instance):
    doc = json.loads(json.dumps(instance_to_dict(n2_instance)))
    again = instance_from_dict(doc)
    assert instance_to_dict(again) == instance_to_dict(n2_instance)
    plan = solve(n2_instance)
    assert DeploymentPlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan


@pytest.mark.parametrize("change", [
    {"buffer": 0.9}, {"objective": "min_latency"}, {"mode": "shared"}, {"budgets": {"TPU": 4}},
    {"multiplex": {"M@A100x4": 0}},
])
def test_instance_invariants(n2_instance, change):
    with pytest.raises(InstanceError):
        n2_instance.replace(**change)


# -- properties on seeded random instances -------------------------------------


def _obj(plan):
    return plan.objective_value if plan.status == "optimal" else math.inf


@slow
@given(seeds, st.sampled_from(["min_energy", "min_cost"]), st.sampled_from([1.5, 2.0, 4.0]))
def test_budget_monotonicity(seed, objective, factor):
    inst = random_instance(seed, objective)
    bigger = inst.replace(budgets={g: b * factor for g, b in inst.budgets.items()})
    assert _obj(solve(bigger)) <= _obj(solve(inst)) * (1 + 1e-9) + 1e-9


@slow
@given(seeds, st.sampled_from(["min_energy", "min_cost"]), st.floats(0.0, 0.2))
def test_accuracy_relaxation_monotonicity(seed, objective, delta):
    inst = random_instance(seed, objective)
    relaxed = [dataclasses.replace(d, slo=dataclasses.replace(d.slo, threshold=max(0.0, d.slo.threshold - delta)))
               if d.slo.slo_type == "max_accuracy" else d for d in inst.demands]
    assert _obj(solve(inst.replace(demands=relaxed))) <= _obj(solve(inst)) * (1 + 1e-9) + 1e-9


@slow
@given(seeds, st.sampled_from([0.5, 3.0, 10.0]))
def test_cost_scaling_invariance(seed, k):
    inst = random_instance(seed, "min_cost")
    scaled = inst.replace(resources={g: dataclasses.replace(r, cost_per_unit_second=r.cost_per_unit_second * k)
                                     for g, r in inst.resources.items()},
                          demands=[dataclasses.replace(d, slo=dataclasses.replace(d.slo, threshold=d.slo.threshold * k))
                                   if d.slo.slo_type == "max_cost" else d for d in inst.demands])
    a, b = solve(inst), solve(scaled)
    assert a.status == b.status
    if a.status == "optimal":
        assert b.objective_value == pytest.approx(k * a.objective_value, rel=1e-6, abs=1e-12)


@slow
@given(seeds, st.sampled_from(["min_energy", "min_cost", "max_accuracy_under_budget"]))
def test_multiplexing_dominance(seed, objective):
    inst = random_instance(seed, objective, "joint")
    joint, split = solve(inst), solve(inst.replace(mode="per_pair"))
    if split.status == "optimal":
        assert joint.status == "optimal"
        assert joint.objective_value <= split.objective_value + 1e-6 * max(1.0, abs(split.objective_value))


@slow
@given(seeds, st.sampled_from(["min_energy", "min_cost", "max_accuracy_under_budget"]),
       st.sampled_from(["joint", "per_pair"]))
def test_solutions_validate(seed, objective, mode):
    inst = random_instance(seed, objective, mode)
    plan = solve(inst)
    if plan.status == "optimal":
        assert validate_plan(inst, plan) == []


@given(st.floats(0.05, 1.0), st.floats(0.001, 0.1), st.floats(1, 3000), st.floats(0, 200))
def test_latency_filter_arithmetic(ttft, tpot, tokens, tau):
    model = make_model(ttft=ttft, tpot=tpot)
    cfg = make_config(p95=tokens)
    inst = OptimizationInstance([cfg], [model], make_resources(), [Demand("w", "s", lat_slo(tau), 1.0, 1.0)])
    kept = bool(filter_feasible(inst))
    assert kept == (ttft + tokens * tpot <= tau)
    assert estimate_request_latency(cfg, model) == pytest.approx(ttft + tokens * tpot)
