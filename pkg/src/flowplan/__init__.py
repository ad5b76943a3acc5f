"""Capacity planning and trace-driven simulation for multi-workflow LLM serving."""

__version__ = "0.1.0"

from .compiler import (
    DeclarativeSpec,
    LogicalWorkflow,
    PlacementScenario,
    load_catalog,
    load_placement_scenario,
    parse_spec,
    resolve_executors,
    serialize_spec,
    type_check,
)
from .optimizer import (
    DeploymentPlan,
    Demand,
    OptimizationInstance,
    plan_report,
    solve,
    validate_plan,
)
from .oracle import brute_force_solve, random_instance
from .profiles import (
    ModelProfile,
    ProfileSet,
    ResourceType,
    SloSpec,
    WorkflowConfig,
    derive_slo_tiers,
    estimate_request_latency,
    load_profile_set,
    perf_at_load,
)
from .scenario import Scenario, data_path, default_scenario, load_scenario
from .sim import SimConfig, SimMetrics, epoch_sensitivity_sweep, ewma_predict, run_simulation
from .traces import DemandTrace, SynthParams, load_trace_csv, synth_trace, write_trace_csv
