"""Scenario files: a profile set plus the policy knobs needed to plan and simulate.

A scenario JSON looks like::

    {
      "resources": "resources.json", "models": "models.json", "workflows": "workflows.json",
      "budgets": {"A100": 128, "H100": 64},
      "buffer": 1.15, "epsilon": 0.001, "multiplex": {},
      "tiers": {"video_qa": {"max_accuracy": {"best": 0.662, ...}}},
      "accuracy_floor": {"video_qa": 0.5},
      "static": {"video_qa": {"config": "gemma-f10-stt", "model": "Gemma-3-27B@A100x4"},
                 "video_qa/latency-good": {"config": "llava-f1", "model": "Llava-OneVision-7B@A100x4"}}
    }

Profile paths are relative to the scenario file. Tier tables missing from
``tiers`` are derived from the profiles. Static choices are keyed by workflow,
optionally refined per SLO label as ``workflow/label``.

SLO labels name a kind and a tier or a number: ``accuracy-good``,
``latency-best``, ``latency-12.5`` (seconds), ``accuracy-0.64`` or
``cost-0.02`` ($ per request).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Mapping

from .optimizer import Demand, DeploymentPlan, OptimizationInstance
from .profiles import (
    TIERS,
    ProfileError,
    ProfileSet,
    SloSpec,
    derive_slo_tiers,
    load_profile_set,
)

Pair = tuple[str, str]
_KINDS = {"accuracy": "max_accuracy", "latency": "min_latency", "cost": "max_cost"}


@dataclass(frozen=True)
class StaticChoice:
    config_id: str
    model_key: str


@dataclass
class Scenario:
    profiles: ProfileSet
    budgets: dict[str, float] = field(default_factory=dict)
    buffer: float = 1.15
    epsilon: float = 0.001
    multiplex: dict[str, float] = field(default_factory=dict)
    tiers: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)
    accuracy_floor: dict[str, float] = field(default_factory=dict)
    static: dict[str, StaticChoice] = field(default_factory=dict)
    time_limit: float = 60.0
    source: Path | None = None

    def __post_init__(self):
        derived = derive_slo_tiers(self.profiles.workflows, self.profiles.models) if self.profiles.workflows else {}
        merged = {w: {k: dict(v) for k, v in t.items()} for w, t in derived.items()}
        for w, table in self.tiers.items():
            for kind, values in table.items():
                merged.setdefault(w, {}).setdefault(kind, {}).update(values)
        self.tiers = merged
        for w, table in self.tiers.items():
            acc = table.get("max_accuracy", {})
            lat = table.get("min_latency", {})
            if acc and not all(acc[a] >= acc[b] for a, b in zip(TIERS, TIERS[1:])):
                raise ProfileError(f"accuracy tiers for {w!r} must be non-increasing from best to basic")
            if lat and not all(lat[a] <= lat[b] for a, b in zip(TIERS, TIERS[1:])):
                raise ProfileError(f"latency tiers for {w!r} must be non-decreasing from best to basic")

    def slo(self, workflow: str, label: str) -> SloSpec:
        """Resolve an SLO label such as ``accuracy-good`` or ``cost-0.02`` for one workflow."""
        kind, _, level = label.partition("-")
        if kind not in _KINDS or not level:
            raise ValueError(f"SLO label {label!r} must look like accuracy-good, latency-12.5 or cost-0.02")
        slo_type = _KINDS[kind]
        floor = None if slo_type == "max_accuracy" else self.accuracy_floor.get(workflow)
        if level in TIERS:
            try:
                threshold = self.tiers[workflow][slo_type][level]
            except KeyError:
                raise ValueError(f"no {slo_type} tier table for workflow {workflow!r}") from None
            return SloSpec(slo_type, threshold, level, floor)
        try:
            threshold = float(level)
        except ValueError:
            raise ValueError(f"SLO label {label!r}: {level!r} is neither a tier nor a number") from None
        return SloSpec(slo_type, threshold, None, floor)

    def instance(self, demands: Mapping[Pair, tuple[float, float]], objective: str = "min_energy",
                 mode: str = "joint", **overrides) -> OptimizationInstance:
        """Planning instance for ``{(workflow, label): (peak, avg)}`` demand in requests/second."""
        ds = [Demand(w, label, self.slo(w, label), float(peak), float(min(avg, peak)))
              for (w, label), (peak, avg) in sorted(demands.items())]
        kwargs = dict(
            budgets=dict(self.budgets), buffer=self.buffer, epsilon=self.epsilon, objective=objective,
            mode=mode, time_limit=self.time_limit, multiplex=dict(self.multiplex),
        )
        kwargs.update(overrides)
        return OptimizationInstance(self.profiles.workflows, self.profiles.models, self.profiles.resources, ds,
                                    **kwargs)

    def static_plan(self, peaks: Mapping[Pair, float]) -> DeploymentPlan:
        """Fixed allocation: each pair gets its own instances of the workflow's static choice,
        sized for the buffered peak rate."""
        counts = {m.key: 0 for m in self.profiles.models}
        pair_counts: dict[Pair, dict[str, int]] = {}
        alloc_peak, alloc_avg = {}, {}
        for (w, label), peak in sorted(peaks.items()):
            choice = self.static.get(f"{w}/{label}", self.static.get(w))
            if choice is None:
                raise ValueError(f"scenario has no static choice for workflow {w!r}")
            config = next(c for c in self.profiles.configs(w) if c.config_id == choice.config_id)
            model = self.profiles.model(choice.model_key)
            mu = self.multiplex.get(model.key, model.multiplex_factor)
            need = mu * self.buffer * peak * config.tokens_per_request.p95 / model.sustainable_tps
            n = math.ceil(need - 1e-12) if need > 0 else 0
            counts[model.key] += n
            pair_counts[(w, label)] = {model.key: n} if n else {}
            key = (w, label, config.config_id, model.key)
            alloc_peak[key] = float(peak)
            alloc_avg[key] = float(peak)
        return DeploymentPlan("optimal", counts, alloc_peak, alloc_avg, None, 0.0, pair_counts)


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base / p


def scenario_from_dict(doc: Mapping, base: Path) -> Scenario:
    try:
        profiles = load_profile_set(
            _resolve(base, doc["resources"]), _resolve(base, doc["models"]), _resolve(base, doc["workflows"])
        )
    except KeyError as exc:
        raise ProfileError(f"scenario is missing field {exc.args[0]!r}") from exc
    static = {w: StaticChoice(v["config"], v["model"]) for w, v in doc.get("static", {}).items()}
    for key, choice in static.items():
        w = key.split("/", 1)[0]
        profiles.model(choice.model_key)
        if not any(c.config_id == choice.config_id for c in profiles.configs(w)):
            raise ProfileError(f"static choice for {w!r} names unknown config {choice.config_id!r}")
    return Scenario(
        profiles=profiles,
        budgets={g: float(b) for g, b in doc.get("budgets", {}).items()},
        buffer=float(doc.get("buffer", 1.15)),
        epsilon=float(doc.get("epsilon", 0.001)),
        multiplex={k: float(v) for k, v in doc.get("multiplex", {}).items()},
        tiers=doc.get("tiers", {}),
        accuracy_floor={w: float(v) for w, v in doc.get("accuracy_floor", {}).items()},
        static=static,
        time_limit=float(doc.get("time_limit", 60.0)),
        source=base,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    return scenario_from_dict(json.loads(path.read_text()), path.parent)


def data_path(name: str) -> Path:
    """Path of a file bundled with the package."""
    return Path(str(importlib_resources.files("flowplan") / "data" / name))


def default_scenario() -> Scenario:
    return load_scenario(data_path("scenario_demo.json"))
