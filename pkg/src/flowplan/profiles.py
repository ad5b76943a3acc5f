"""Workflow and model profiles: loading, validation, load-curve queries and SLO tiers.

Two profiling layers feed the planner. Model profiles describe one
(model, resource type, parallelism) deployment and how its latency and power
change with offered token load. Workflow profiles describe one configuration of
a workflow (its knob settings), the accuracy it achieves and the token demand it
places on the LLM serving it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

PERCENTILES = ("p50", "p95", "p99")
TIERS = ("best", "good", "fair", "basic")
SLO_TYPES = ("max_accuracy", "min_latency", "max_cost")

# nearest-rank percentile used for each tier; accuracy counts from the top,
# latency from the bottom
_ACCURACY_TIER_PCT = {"best": 100, "good": 95, "fair": 80, "basic": 50}
_LATENCY_TIER_PCT = {"best": 0, "good": 5, "fair": 20, "basic": 50}


class ProfileError(ValueError):
    """Raised when a profile file cannot be parsed or a record breaks an invariant."""


class OverloadError(ValueError):
    """Offered load exceeds what a single instance can sustain."""


@dataclass(frozen=True)
class ResourceType:
    name: str
    cost_per_unit_second: float
    capacity: float = math.inf
    # watts drawn by one idle unit held as spare headroom
    idle_power: float = 0.0

    def __post_init__(self):
        if self.cost_per_unit_second < 0:
            raise ProfileError(f"resource {self.name!r}: cost_per_unit_second must be >= 0")
        if self.capacity < 0:
            raise ProfileError(f"resource {self.name!r}: capacity must be >= 0")
        if self.idle_power < 0:
            raise ProfileError(f"resource {self.name!r}: idle_power must be >= 0")


@dataclass(frozen=True)
class LoadPoint:
    offered_tps: float
    ttft: float
    tpot: float
    power: float

    def __post_init__(self):
        for name in ("offered_tps", "ttft", "tpot", "power"):
            value = getattr(self, name)
            if not (value >= 0) or math.isinf(value):
                raise ProfileError(f"load point {name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class ModelProfile:
    model_name: str
    resource_type: str
    parallelism: int
    load_curve: tuple[LoadPoint, ...]
    energy_rate: float | None = None
    multiplex_factor: float = 1.0

    def __post_init__(self):
        where = f"model profile {self.model_name}@{self.resource_type}x{self.parallelism}"
        if not self.load_curve:
            raise ProfileError(f"{where}: load_curve must be non-empty")
        if self.parallelism < 1:
            raise ProfileError(f"{where}: parallelism must be >= 1")
        if self.multiplex_factor < 1:
            raise ProfileError(f"{where}: multiplex_factor must be >= 1")
        prev = None
        for point in self.load_curve:
            if prev is not None:
                if point.offered_tps <= prev.offered_tps:
                    raise ProfileError(f"{where}: load_curve offered_tps must be strictly increasing")
                if point.ttft < prev.ttft or point.tpot < prev.tpot:
                    raise ProfileError(f"{where}: ttft and tpot must be non-decreasing along load_curve")
            prev = point
        if self.load_curve[-1].offered_tps <= 0:
            raise ProfileError(f"{where}: sustainable throughput must be positive")
        if self.energy_rate is None:
            # kWh per unit-hour at sustainable load
            object.__setattr__(self, "energy_rate", self.load_curve[-1].power / 1000.0)
        elif self.energy_rate < 0:
            raise ProfileError(f"{where}: energy_rate must be >= 0")

    @property
    def key(self) -> str:
        return f"{self.model_name}@{self.resource_type}x{self.parallelism}"

    @property
    def sustainable_tps(self) -> float:
        return self.load_curve[-1].offered_tps

    @property
    def ttft(self) -> float:
        return self.load_curve[-1].ttft

    @property
    def tpot(self) -> float:
        return self.load_curve[-1].tpot

    @property
    def idle_power(self) -> float:
        return perf_at_load(self, 0.0).power


@dataclass(frozen=True)
class TokenStats:
    p50: float
    p95: float
    p99: float
    mean: float

    def __post_init__(self):
        for name in ("p50", "p95", "p99", "mean"):
            if getattr(self, name) < 0:
                raise ProfileError(f"tokens_per_request.{name} must be >= 0")
        if not (self.p50 <= self.p95 <= self.p99):
            raise ProfileError(
                f"tokens_per_request must satisfy p50 <= p95 <= p99, got "
                f"{self.p50}, {self.p95}, {self.p99}"
            )

    def __getitem__(self, percentile: str) -> float:
        if percentile not in PERCENTILES and percentile != "mean":
            raise KeyError(percentile)
        return getattr(self, percentile)


@dataclass(frozen=True)
class Placement:
    resource: str
    latency: float
    units: float = 1.0

    def __post_init__(self):
        if not self.latency > 0:
            raise ProfileError(f"placement on {self.resource!r}: latency must be > 0")
        if self.units < 0:
            raise ProfileError(f"placement on {self.resource!r}: units must be >= 0")


@dataclass(frozen=True)
class ToolStage:
    stage_name: str
    executor_name: str
    placement_options: tuple[Placement, ...]

    def __post_init__(self):
        if not self.placement_options:
            raise ProfileError(f"tool stage {self.stage_name!r}: needs at least one placement option")

    def placement(self, resource: str | None = None) -> Placement:
        if resource is None:
            return self.placement_options[0]
        for option in self.placement_options:
            if option.resource == resource:
                return option
        raise KeyError(f"stage {self.stage_name!r} has no placement on {resource!r}")


@dataclass(frozen=True)
class WorkflowConfig:
    workflow_name: str
    config_id: str
    accuracy: float
    tokens_per_request: TokenStats
    compatible_models: tuple[str, ...]
    knobs: Mapping[str, Any] = field(default_factory=dict)
    tool_stages: tuple[ToolStage, ...] = ()

    def __post_init__(self):
        where = f"workflow config {self.workflow_name}/{self.config_id}"
        if not 0 <= self.accuracy <= 1:
            raise ProfileError(f"{where}: accuracy must be in [0, 1]")
        if not self.compatible_models:
            raise ProfileError(f"{where}: compatible_models must be non-empty")

    @property
    def key(self) -> tuple[str, str]:
        return (self.workflow_name, self.config_id)

    def tool_latency(self, placements: Mapping[str, str] | None = None) -> float:
        """Latency of the declared tool stages run back to back.

        Each stage uses the resource named in ``placements`` or, if absent, its
        first listed placement option.
        """
        placements = placements or {}
        return sum(s.placement(placements.get(s.stage_name)).latency for s in self.tool_stages)


@dataclass(frozen=True)
class SloSpec:
    slo_type: str
    threshold: float
    tier: str | None = None
    # accuracy floor applied on top of a latency or cost SLO
    min_accuracy: float | None = None

    def __post_init__(self):
        if self.slo_type not in SLO_TYPES:
            raise ProfileError(f"unknown slo_type {self.slo_type!r}")
        if self.tier is not None and self.tier not in TIERS:
            raise ProfileError(f"unknown tier {self.tier!r}")
        if math.isnan(self.threshold):
            raise ProfileError("SLO threshold must be a number")


@dataclass
class ProfileSet:
    resources: dict[str, ResourceType]
    models: list[ModelProfile]
    workflows: list[WorkflowConfig]

    def model(self, key: str) -> ModelProfile:
        for m in self.models:
            if m.key == key:
                return m
        raise KeyError(key)

    def configs(self, workflow: str) -> list[WorkflowConfig]:
        return [c for c in self.workflows if c.workflow_name == workflow]


# -- load-curve queries --------------------------------------------------------


def perf_at_load(profile: ModelProfile, offered: float) -> LoadPoint:
    """Latency and power of one instance at ``offered`` tokens/second.

    Piecewise-linear between the bracketing profile points. Below the first
    point the first point's values hold; above the sustainable throughput an
    :class:`OverloadError` is raised.
    """
    curve = profile.load_curve
    if offered < 0:
        raise ValueError("offered load must be >= 0")
    if offered > curve[-1].offered_tps:
        raise OverloadError(
            f"{profile.key}: offered {offered:g} tps exceeds sustainable {curve[-1].offered_tps:g} tps"
        )
    if offered <= curve[0].offered_tps:
        p = curve[0]
        return LoadPoint(offered, p.ttft, p.tpot, p.power)
    for lo, hi in zip(curve, curve[1:]):
        if offered == hi.offered_tps:
            return hi
        if offered < hi.offered_tps:
            w = (offered - lo.offered_tps) / (hi.offered_tps - lo.offered_tps)
            return LoadPoint(
                offered,
                lo.ttft + w * (hi.ttft - lo.ttft),
                lo.tpot + w * (hi.tpot - lo.tpot),
                lo.power + w * (hi.power - lo.power),
            )
    return curve[-1]


def estimate_request_latency(
    config: WorkflowConfig,
    model: ModelProfile,
    percentile: str = "p95",
    offered: float | None = None,
    tool_latency: float | None = None,
) -> float:
    """End-to-end latency of one request: tool stages, then the LLM stage.

    ``offered`` defaults to the model's sustainable throughput. Pass
    ``tool_latency`` when the tool critical path was computed from a DAG
    binding; otherwise the config's declared tool stages are summed.
    """
    if model.model_name not in config.compatible_models:
        raise ValueError(f"model {model.model_name!r} is not compatible with config {config.config_id!r}")
    if percentile not in PERCENTILES:
        raise ValueError(f"percentile must be one of {PERCENTILES}")
    point = perf_at_load(model, model.sustainable_tps if offered is None else offered)
    tools = config.tool_latency() if tool_latency is None else tool_latency
    return tools + point.ttft + config.tokens_per_request[percentile] * point.tpot


# -- SLO tiers -----------------------------------------------------------------


def nearest_rank(values: Sequence[float], pct: int) -> float:
    """Nearest-rank percentile; ``pct`` is an integer in [0, 100]."""
    if not values:
        raise ValueError("percentile of an empty set")
    ordered = sorted(values)
    rank = max(1, -(-pct * len(ordered) // 100))
    return ordered[rank - 1]


def derive_slo_tiers(
    workflows: Iterable[WorkflowConfig], models: Iterable[ModelProfile]
) -> dict[str, dict[str, dict[str, float]]]:
    """Tier thresholds per workflow over every achievable (config, model profile) pair.

    Returns ``{workflow: {"max_accuracy": {tier: value}, "min_latency": {tier: value}}}``.
    Latencies are p95 estimates at each profile's sustainable load.
    """
    models = list(models)
    by_name: dict[str, list[ModelProfile]] = {}
    for m in models:
        by_name.setdefault(m.model_name, []).append(m)
    accuracies: dict[str, list[float]] = {}
    latencies: dict[str, list[float]] = {}
    names: set[str] = set()
    for c in workflows:
        names.add(c.workflow_name)
        for name in c.compatible_models:
            for m in by_name.get(name, ()):
                accuracies.setdefault(c.workflow_name, []).append(c.accuracy)
                latencies.setdefault(c.workflow_name, []).append(estimate_request_latency(c, m))
    table = {}
    for w in sorted(names):
        if w not in accuracies:
            raise ValueError(f"workflow {w!r} has no (config, compatible model) pair")
        table[w] = {
            "max_accuracy": {t: nearest_rank(accuracies[w], p) for t, p in _ACCURACY_TIER_PCT.items()},
            "min_latency": {t: nearest_rank(latencies[w], p) for t, p in _LATENCY_TIER_PCT.items()},
        }
    return table


# -- (de)serialization ---------------------------------------------------------


def _read_json(path: str | Path) -> Any:
    text = Path(path).read_text()
    if not text.strip():
        return []
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _field(record: Mapping, name: str, where: str, default: Any = ...):
    if name in record:
        return record[name]
    if default is ...:
        raise ProfileError(f"{where}: missing field {name!r}")
    return default


def resource_from_dict(d: Mapping) -> ResourceType:
    where = f"resource {d.get('name', '?')!r}"
    cap = _field(d, "capacity", where, None)
    return ResourceType(
        name=str(_field(d, "name", where)),
        cost_per_unit_second=float(_field(d, "cost_per_unit_second", where)),
        capacity=math.inf if cap is None else float(cap),
        idle_power=float(d.get("idle_power", 0.0)),
    )


def resource_to_dict(r: ResourceType) -> dict:
    return {
        "name": r.name,
        "cost_per_unit_second": r.cost_per_unit_second,
        "capacity": None if math.isinf(r.capacity) else r.capacity,
        "idle_power": r.idle_power,
    }


def model_from_dict(d: Mapping) -> ModelProfile:
    where = f"model {d.get('model', '?')!r}"
    curve = tuple(
        LoadPoint(float(p["offered_tps"]), float(p["ttft"]), float(p["tpot"]), float(p["power"]))
        for p in _field(d, "load_curve", where)
    )
    energy = d.get("energy_rate")
    return ModelProfile(
        model_name=str(_field(d, "model", where)),
        resource_type=str(_field(d, "resource", where)),
        parallelism=int(_field(d, "parallelism", where)),
        load_curve=curve,
        energy_rate=None if energy is None else float(energy),
        multiplex_factor=float(d.get("multiplex_factor", 1.0)),
    )


def model_to_dict(m: ModelProfile) -> dict:
    return {
        "model": m.model_name,
        "resource": m.resource_type,
        "parallelism": m.parallelism,
        "load_curve": [
            {"offered_tps": p.offered_tps, "ttft": p.ttft, "tpot": p.tpot, "power": p.power}
            for p in m.load_curve
        ],
        "energy_rate": m.energy_rate,
        "multiplex_factor": m.multiplex_factor,
    }


def tool_stage_from_dict(d: Mapping) -> ToolStage:
    return ToolStage(
        stage_name=str(d["stage"]),
        executor_name=str(d["executor"]),
        placement_options=tuple(
            Placement(str(p["resource"]), float(p["latency"]), float(p.get("units", 1.0)))
            for p in d["placements"]
        ),
    )


def tokens_from_dict(d: Mapping) -> TokenStats:
    return TokenStats(float(d["p50"]), float(d["p95"]), float(d["p99"]), float(d["mean"]))


def workflow_from_dict(d: Mapping) -> WorkflowConfig:
    where = f"workflow config {d.get('workflow', '?')}/{d.get('config_id', '?')}"
    tok = _field(d, "tokens_per_request", where)
    try:
        tokens = tokens_from_dict(tok)
    except KeyError as exc:
        raise ProfileError(f"{where}: tokens_per_request missing {exc.args[0]!r}") from exc
    except ProfileError as exc:
        raise ProfileError(f"{where}: {exc}") from exc
    stages = tuple(tool_stage_from_dict(s) for s in d.get("tool_stages", []))
    return WorkflowConfig(
        workflow_name=str(_field(d, "workflow", where)),
        config_id=str(_field(d, "config_id", where)),
        accuracy=float(_field(d, "accuracy", where)),
        tokens_per_request=tokens,
        compatible_models=tuple(_field(d, "compatible_models", where)),
        knobs=dict(d.get("knobs", {})),
        tool_stages=stages,
    )


def workflow_to_dict(c: WorkflowConfig) -> dict:
    t = c.tokens_per_request
    return {
        "workflow": c.workflow_name,
        "config_id": c.config_id,
        "knobs": dict(c.knobs),
        "accuracy": c.accuracy,
        "tokens_per_request": {"p50": t.p50, "p95": t.p95, "p99": t.p99, "mean": t.mean},
        "compatible_models": list(c.compatible_models),
        "tool_stages": [
            {
                "stage": s.stage_name,
                "executor": s.executor_name,
                "placements": [
                    {"resource": p.resource, "latency": p.latency, "units": p.units}
                    for p in s.placement_options
                ],
            }
            for s in c.tool_stages
        ],
    }


def _parse_records(records: Any, parse, kind: str, path) -> list:
    if not isinstance(records, list):
        raise ProfileError(f"{path}: expected a JSON array of {kind} records")
    out = []
    for i, rec in enumerate(records):
        try:
            out.append(parse(rec))
        except ProfileError as exc:
            raise ProfileError(f"{path}: {kind} record {i}: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ProfileError(f"{path}: {kind} record {i}: bad field ({exc})") from exc
    return out


def parse_models(records: Any, source: str = "<models>") -> list[ModelProfile]:
    models = _parse_records(records, model_from_dict, "model", source)
    seen: set[str] = set()
    for m in models:
        if m.key in seen:
            raise ProfileError(f"{source}: duplicate model profile {m.key}")
        seen.add(m.key)
    return models


def parse_workflows(records: Any, source: str = "<workflows>") -> list[WorkflowConfig]:
    configs = _parse_records(records, workflow_from_dict, "workflow", source)
    seen: set[tuple[str, str]] = set()
    for c in configs:
        if c.key in seen:
            raise ProfileError(f"{source}: duplicate workflow config {c.key}")
        seen.add(c.key)
    return configs


def parse_resources(records: Any, source: str = "<resources>") -> dict[str, ResourceType]:
    resources = _parse_records(records, resource_from_dict, "resource", source)
    out: dict[str, ResourceType] = {}
    for r in resources:
        if r.name in out:
            raise ProfileError(f"{source}: duplicate resource {r.name}")
        out[r.name] = r
    return out


def load_profiles(model_path, workflow_path) -> tuple[list[ModelProfile], list[WorkflowConfig]]:
    models = parse_models(_read_json(model_path), str(model_path))
    workflows = parse_workflows(_read_json(workflow_path), str(workflow_path))
    return models, workflows


def load_resources(path) -> dict[str, ResourceType]:
    return parse_resources(_read_json(path), str(path))


def load_profile_set(resources_path, model_path, workflow_path) -> ProfileSet:
    resources = load_resources(resources_path)
    models, workflows = load_profiles(model_path, workflow_path)
    for m in models:
        if m.resource_type not in resources:
            raise ProfileError(f"{model_path}: model {m.key} uses unknown resource {m.resource_type!r}")
    return ProfileSet(resources, models, workflows)


def dump_models(models: Iterable[ModelProfile]) -> list[dict]:
    return [model_to_dict(m) for m in models]


def dump_workflows(configs: Iterable[WorkflowConfig]) -> list[dict]:
    return [workflow_to_dict(c) for c in configs]
