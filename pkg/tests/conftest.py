import math

import pytest

from flowplan.optimizer import Demand, OptimizationInstance
from flowplan.profiles import LoadPoint, ModelProfile, ResourceType, SloSpec, TokenStats, WorkflowConfig


def make_model(name="M", resource="A100", g=4, theta=700.0, ttft=0.2, tpot=0.0224, power=400.0, idle=100.0,
               mu=1.0, energy_rate=None):
    curve = (LoadPoint(0.0, ttft, tpot, idle), LoadPoint(theta, ttft, tpot, power))
    return ModelProfile(name, resource, g, curve, energy_rate, mu)


def make_config(workflow="w", cid="c", accuracy=0.662, p95=800.0, models=("M",), p50=None, p99=None, mean=None):
    p50 = p95 if p50 is None else p50
    p99 = p95 if p99 is None else p99
    mean = p50 if mean is None else mean
    return WorkflowConfig(workflow, cid, accuracy, TokenStats(p50, p95, p99, mean), tuple(models))


def make_resources(a100_cost=1e-3, h100_cost=2e-3, a100_cap=math.inf, h100_cap=math.inf):
    return {
        "A100": ResourceType("A100", a100_cost, a100_cap, 50.0),
        "H100": ResourceType("H100", h100_cost, h100_cap, 70.0),
        "CPU": ResourceType("CPU", 1e-5, math.inf, 5.0),
    }


def acc_slo(tau, tier=None):
    return SloSpec("max_accuracy", tau, tier)


def lat_slo(tau, floor=None):
    return SloSpec("min_latency", tau, None, floor)


def cost_slo(tau, floor=None):
    return SloSpec("max_cost", tau, None, floor)


def small_instance(peak=1.0, avg=0.5, budgets=None, objective="min_energy", **kw):
    """One workflow, one accuracy SLO, one config (t95 = 800) and one model (theta = 700, g = 4)."""
    return OptimizationInstance(
        configs=[make_config()],
        models=[make_model(energy_rate=0.3)],
        resources=make_resources(),
        demands=[Demand("w", "acc", acc_slo(0.64), peak, avg)],
        budgets=budgets or {},
        objective=objective,
        **kw,
    )


@pytest.fixture
def n2_instance():
    return small_instance()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
