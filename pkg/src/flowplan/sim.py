"""Epoch-based, trace-driven simulation of planned serving.

Each epoch the planner forecasts demand, solves for a deployment and reconciles
the cluster toward it: scale-ups wait out the provisioning delay, scale-downs
are immediate. Inside an epoch every trace bin is routed fluidly across the
plan's (config, model) allocations. The auto-scaler watches per-model load in
short windows and adds instances, drawing first on idle spare units.

Accounting per bin of length ``dt`` seconds:

* energy (kWh): active units at the load-dependent power of their profile,
  pending units at the profile's idle power, spare units at the resource's idle power
* cost ($): every allocated unit (active, pending or spare) at ``c_g * dt``
* dropped: requests beyond the sustainable capacity of the model they were routed to
* violations: served requests of latency-SLO pairs whose estimated latency exceeds the threshold
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .optimizer import DeploymentPlan, solve
from .profiles import ModelProfile, SloSpec, WorkflowConfig, perf_at_load
from .scenario import Scenario
from .traces import DemandTrace

POLICIES = ("static", "opt", "opt_mult")
PREDICTORS = ("ewma", "oracle")
_MODE = {"opt": "per_pair", "opt_mult": "joint"}
_J_PER_KWH = 3.6e6

Pair = tuple[str, str]
Rates = dict[Pair, tuple[float, float]]  # pair -> (peak, avg) requests/second


class SimError(ValueError):
    pass


@dataclass
class SimConfig:
    epoch_length: float = 3600.0
    autoscale_window: float = 60.0
    autoscale_threshold: float = 0.9
    policy: str = "opt_mult"
    static_plan: DeploymentPlan | None = None
    objective: str = "min_energy"
    provisioning_delay: float = 1200.0
    spare_fraction: float = 0.05
    ewma_alpha: float = 0.5
    predictor: str = "ewma"
    autoscale: bool = True
    early_reopt: bool = True
    early_reopt_threshold: float = 0.25
    record_bins: bool = False

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise SimError(f"policy must be one of {POLICIES}")
        if self.predictor not in PREDICTORS:
            raise SimError(f"predictor must be one of {PREDICTORS}")
        if not 0 < self.autoscale_threshold <= 1:
            raise SimError("autoscale_threshold must be in (0, 1]")
        if not 0 < self.ewma_alpha <= 1:
            raise SimError("ewma_alpha must be in (0, 1]")
        if self.epoch_length <= 0 or self.autoscale_window <= 0:
            raise SimError("epoch_length and autoscale_window must be positive")
        if self.provisioning_delay < 0 or not 0 <= self.spare_fraction < 1:
            raise SimError("provisioning_delay must be >= 0 and spare_fraction in [0, 1)")


# -- forecasting ---------------------------------------------------------------


@dataclass(frozen=True)
class PredictorState:
    alpha: float = 0.5
    forecast: Mapping[Pair, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise SimError("alpha must be in (0, 1]")


def ewma_predict(state: PredictorState, observed: Mapping[Pair, tuple[float, float]]) -> PredictorState:
    """Blend observed (peak, avg) into the forecast; unseen pairs start at their observation."""
    a = state.alpha
    out = dict(state.forecast)
    for pair, (peak, avg) in observed.items():
        if peak < 0 or avg < 0:
            raise SimError(f"observed demand for {pair} must be >= 0")
        if pair in out:
            fp, fa = out[pair]
            out[pair] = (a * peak + (1 - a) * fp, a * avg + (1 - a) * fa)
        else:
            out[pair] = (float(peak), float(avg))
    return PredictorState(a, out)


def _bins_per(length: float, resolution: float, what: str) -> int:
    ratio = length / resolution
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise SimError(f"{what} ({length:g} s) must be a positive multiple of the trace resolution ({resolution:g} s)")
    return k


def num_epochs(trace: DemandTrace, epoch_length: float) -> int:
    return math.ceil(trace.num_bins / _bins_per(epoch_length, trace.resolution, "epoch length"))


def aggregate_epoch(trace: DemandTrace, epoch_index: int, epoch_length: float) -> Rates:
    """Peak and mean bin rate (requests/second) per pair within one epoch."""
    per = _bins_per(epoch_length, trace.resolution, "epoch length")
    if not 0 <= epoch_index < num_epochs(trace, epoch_length):
        raise SimError(f"epoch {epoch_index} is outside the trace")
    lo, hi = epoch_index * per, min((epoch_index + 1) * per, trace.num_bins)
    out = {}
    for pair in trace.pairs:
        r = trace.series[pair][lo:hi] / trace.resolution
        out[pair] = (float(r.max()), float(r.mean()))
    return out


# -- cluster state -------------------------------------------------------------


@dataclass
class PendingBatch:
    model: str
    count: int
    ready: float
    autoscaled: bool = False


@dataclass(frozen=True)
class ScaleDecision:
    model: str
    from_spare: int
    provisioned: int


@dataclass
class ClusterState:
    active: dict[str, int] = field(default_factory=dict)
    pending: list[PendingBatch] = field(default_factory=list)
    provisioning_delay: float = 1200.0
    spare_fraction: float = 0.05
    # idle units per resource held for instant scale-out
    spare: dict[str, int] = field(default_factory=dict)
    # active instances added by the auto-scaler since the last plan
    boost: dict[str, int] = field(default_factory=dict)

    def pending_count(self, model: str) -> int:
        return sum(b.count for b in self.pending if b.model == model)

    def allocated(self, model: str) -> int:
        return self.active.get(model, 0) + self.pending_count(model)

    def activate(self, now: float) -> None:
        keep = []
        for b in self.pending:
            if b.ready <= now:
                self.active[b.model] = self.active.get(b.model, 0) + b.count
                if b.autoscaled:
                    self.boost[b.model] = self.boost.get(b.model, 0) + b.count
            else:
                keep.append(b)
        self.pending = keep

    def _provision(self, model: str, count: int, now: float, autoscaled: bool) -> None:
        if count <= 0:
            return
        if self.provisioning_delay == 0:
            self.active[model] = self.active.get(model, 0) + count
            if autoscaled:
                self.boost[model] = self.boost.get(model, 0) + count
        else:
            self.pending.append(PendingBatch(model, count, now + self.provisioning_delay, autoscaled))

    def reconcile(self, target: Mapping[str, int], now: float, models: Mapping[str, ModelProfile],
                  budgets: Mapping[str, float], warm: bool = False) -> None:
        """Move toward ``target`` counts: scale-ups go pending, scale-downs cancel pending first.

        ``warm`` deploys scale-ups immediately (the initial deployment).
        """
        if warm:
            for m, n in target.items():
                if n > self.allocated(m):
                    self.active[m] = self.active.get(m, 0) + int(n) - self.allocated(m)
        self.boost = {}
        for b in self.pending:
            b.autoscaled = False
        for m in sorted(set(target) | set(self.active) | {b.model for b in self.pending}):
            want = int(target.get(m, 0))
            have = self.allocated(m)
            if want > have:
                self._provision(m, want - have, now, autoscaled=False)
            elif want < have:
                excess = have - want
                for b in sorted((b for b in self.pending if b.model == m), key=lambda b: -b.ready):
                    take = min(excess, b.count)
                    b.count -= take
                    excess -= take
                self.pending = [b for b in self.pending if b.count > 0]
                if excess:
                    self.active[m] = self.active.get(m, 0) - excess
        self.active = {m: n for m, n in self.active.items() if n > 0}
        self.resize_spare(models, budgets)

    def units(self, models: Mapping[str, ModelProfile]) -> dict[str, int]:
        out: dict[str, int] = {}
        for m in set(self.active) | {b.model for b in self.pending}:
            g = models[m].resource_type
            out[g] = out.get(g, 0) + self.allocated(m) * models[m].parallelism
        return out

    def resize_spare(self, models: Mapping[str, ModelProfile], budgets: Mapping[str, float]) -> None:
        self.spare = {}
        for g, used in self.units(models).items():
            room = budgets.get(g, math.inf) - used
            self.spare[g] = int(max(0, min(math.floor(self.spare_fraction * used), room)))

    def apply(self, decisions: Sequence[ScaleDecision], now: float, models: Mapping[str, ModelProfile]) -> None:
        for d in decisions:
            if d.from_spare:
                g = models[d.model].resource_type
                self.spare[g] -= d.from_spare * models[d.model].parallelism
                self.active[d.model] = self.active.get(d.model, 0) + d.from_spare
                self.boost[d.model] = self.boost.get(d.model, 0) + d.from_spare
            self._provision(d.model, d.provisioned, now, autoscaled=True)


def autoscale(cluster: ClusterState, window_load: Mapping[str, float], models: Mapping[str, ModelProfile],
              threshold: float = 0.9, budgets: Mapping[str, float] | None = None) -> list[ScaleDecision]:
    """Scale-out decisions for models whose window load exceeds ``threshold`` of allocated capacity.

    Adds ``ceil((load / threshold - n * theta) / theta)`` instances, taken from the
    spare pool when possible and otherwise provisioned, within the resource budgets.
    Never scales in.
    """
    budgets = budgets or {}
    spare = dict(cluster.spare)
    units = cluster.units(models)
    out = []
    for key in sorted(window_load):
        load = window_load[key]
        if load <= 0:
            continue
        m = models[key]
        n = cluster.allocated(key)
        theta = m.sustainable_tps
        if n > 0 and load / (n * theta) <= threshold:
            continue
        add = math.ceil((load / threshold - n * theta) / theta - 1e-9)
        if add <= 0:
            continue
        g, size = m.resource_type, m.parallelism
        from_spare = min(add, spare.get(g, 0) // size)
        spare[g] = spare.get(g, 0) - from_spare * size
        room = budgets.get(g, math.inf) - units.get(g, 0) - spare.get(g, 0) - from_spare * size
        fresh = add - from_spare
        if math.isfinite(room):
            fresh = max(0, min(fresh, int(room // size)))
        units[g] = units.get(g, 0) + (from_spare + fresh) * size
        if from_spare or fresh:
            out.append(ScaleDecision(key, from_spare, fresh))
    return out


# -- routing and accounting ----------------------------------------------------


@dataclass
class BinMetrics:
    energy_kwh: float = 0.0
    cost: float = 0.0
    violations: float = 0.0
    dropped: float = 0.0
    shadow_dropped: float = 0.0
    requests: float = 0.0
    served_tokens: float = 0.0
    capacity_tokens: float = 0.0
    load_by_model: dict[str, float] = field(default_factory=dict)
    offered_by_model: dict[str, float] = field(default_factory=dict)
    units: dict[str, int] = field(default_factory=dict)


class SimContext:
    """Lookups shared by every bin: profiles by key, budgets and the SLO of each trace pair."""

    def __init__(self, scenario: Scenario, pairs: Sequence[Pair]):
        self.scenario = scenario
        self.models = {m.key: m for m in scenario.profiles.models}
        self.configs = {c.key: c for c in scenario.profiles.workflows}
        self.resources = scenario.profiles.resources
        self.budgets = {g: scenario.budgets.get(g, r.capacity) for g, r in self.resources.items()}
        try:
            self.slos: dict[Pair, SloSpec] = {p: scenario.slo(*p) for p in pairs}
        except ValueError as exc:
            raise SimError(f"trace does not match the scenario: {exc}") from exc


def routing_weights(plan: DeploymentPlan) -> dict[Pair, list[tuple[str, str, float]]]:
    """Per pair, the (config_id, model key, share) split implied by the peak allocation."""
    totals: dict[Pair, float] = {}
    for k, x in plan.alloc_peak.items():
        if x > 0:
            totals[(k[0], k[1])] = totals.get((k[0], k[1]), 0.0) + x
    out: dict[Pair, list[tuple[str, str, float]]] = {}
    for k, x in sorted(plan.alloc_peak.items()):
        if x > 0:
            out.setdefault((k[0], k[1]), []).append((k[2], k[3], x / totals[(k[0], k[1])]))
    return out


def route_and_account(cluster: ClusterState, weights: Mapping[Pair, list[tuple[str, str, float]]],
                      demand: Mapping[Pair, float], ctx: SimContext, dt: float) -> BinMetrics:
    """Serve one bin of ``demand`` (requests/second per pair) for ``dt`` seconds."""
    out = BinMetrics()
    routed: dict[str, list[tuple[Pair, WorkflowConfig, float]]] = {}
    for pair, rate in demand.items():
        out.requests += rate * dt
        if rate <= 0:
            continue
        if pair not in weights:
            out.dropped += rate * dt
            out.shadow_dropped += rate * dt
            continue
        for config_id, model, share in weights[pair]:
            routed.setdefault(model, []).append((pair, ctx.configs[(pair[0], config_id)], rate * share))
    for key in sorted(set(routed) | set(cluster.active) | {b.model for b in cluster.pending}):
        m = ctx.models[key]
        flows = routed.get(key, [])
        load = sum(r * c.tokens_per_request.p95 for _, c, r in flows)
        reqs = sum(r for _, _, r in flows)
        active = cluster.active.get(key, 0)
        cap = active * m.sustainable_tps
        shadow_cap = (active - cluster.boost.get(key, 0)) * m.sustainable_tps
        # relative slack absorbs float noise in plans sized exactly to demand
        served = 1.0 if load <= cap * (1 + 1e-9) else cap / load
        shadow_served = 1.0 if load <= shadow_cap * (1 + 1e-9) else shadow_cap / load
        out.dropped += reqs * (1 - served) * dt
        out.shadow_dropped += reqs * (1 - shadow_served) * dt
        out.load_by_model[key] = load
        offered = min(min(load, cap) / active, m.sustainable_tps) if active else 0.0
        out.offered_by_model[key] = offered
        point = perf_at_load(m, offered)
        for pair, c, r in flows:
            slo = ctx.slos[pair]
            if slo.slo_type == "min_latency" and point.ttft + c.tokens_per_request.p95 * point.tpot > slo.threshold:
                out.violations += r * served * dt
        out.served_tokens += min(load, cap) * dt
        out.capacity_tokens += cap * dt
        pending = cluster.pending_count(key)
        out.energy_kwh += (active * point.power + pending * m.idle_power) * m.parallelism * dt / _J_PER_KWH
        rate = ctx.resources[m.resource_type].cost_per_unit_second
        out.cost += (active + pending) * m.parallelism * rate * dt
    for g, idle in sorted(cluster.spare.items()):
        res = ctx.resources[g]
        out.energy_kwh += idle * res.idle_power * dt / _J_PER_KWH
        out.cost += idle * res.cost_per_unit_second * dt
    units = cluster.units(ctx.models)
    for g, idle in cluster.spare.items():
        units[g] = units.get(g, 0) + idle
    out.units = units
    return out


# -- metrics -------------------------------------------------------------------


@dataclass
class EpochMetrics:
    epoch: int
    start: float
    gpus_by_type: dict[str, float]
    peak_gpus_by_type: dict[str, float]
    energy_kwh: float
    cost: float
    violations: float
    dropped: float
    requests: float
    shadow_dropped: float
    served_tokens: float
    capacity_tokens: float
    status: str
    reoptimized: bool
    instance_counts: dict[str, int]


@dataclass
class BinRecord:
    t: float
    dt: float
    active: dict[str, int]
    pending: dict[str, int]
    spare: dict[str, int]
    offered: dict[str, float]
    energy_kwh: float
    cost: float


@dataclass
class SimMetrics:
    resources: list[str]
    epochs: list[EpochMetrics] = field(default_factory=list)
    bins: list[BinRecord] = field(default_factory=list)
    policy: str = ""

    def _sum(self, name: str) -> float:
        return float(sum(getattr(e, name) for e in self.epochs))

    @property
    def energy_kwh(self) -> float:
        return self._sum("energy_kwh")

    @property
    def cost(self) -> float:
        return self._sum("cost")

    @property
    def violations(self) -> float:
        return self._sum("violations")

    @property
    def dropped(self) -> float:
        return self._sum("dropped")

    @property
    def requests(self) -> float:
        return self._sum("requests")

    @property
    def under_prediction_fraction(self) -> float:
        total = self.requests
        return self._sum("shadow_dropped") / total if total > 0 else 0.0

    @property
    def mean_utilization(self) -> float:
        cap = self._sum("capacity_tokens")
        return self._sum("served_tokens") / cap if cap > 0 else 0.0

    def gpus_by_type(self) -> dict[str, float]:
        """Sum over epochs of the time-averaged allocated units."""
        return {g: float(sum(e.gpus_by_type.get(g, 0.0) for e in self.epochs)) for g in self.resources}

    def peak_gpus(self, exclude: Sequence[str] = ("CPU",)) -> float:
        """Largest number of accelerator units allocated at any time."""
        return max((sum(v for g, v in e.peak_gpus_by_type.items() if g not in exclude) for e in self.epochs),
                   default=0.0)

    def totals(self) -> dict:
        return {
            "gpus_by_type": self.gpus_by_type(),
            "peak_gpus": self.peak_gpus(),
            "energy_kwh": self.energy_kwh,
            "cost": self.cost,
            "violations": self.violations,
            "dropped": self.dropped,
            "requests": self.requests,
            "under_prediction_fraction": self.under_prediction_fraction,
            "mean_utilization": self.mean_utilization,
        }

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "resources": list(self.resources),
            "epochs": [dataclasses.asdict(e) for e in self.epochs],
            "totals": self.totals(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SimMetrics":
        try:
            epochs = [EpochMetrics(**e) for e in doc["epochs"]]
            return cls(list(doc["resources"]), epochs, [], doc.get("policy", ""))
        except (KeyError, TypeError) as exc:
            raise SimError(f"metrics document does not match the schema: {exc}") from exc


# -- driver --------------------------------------------------------------------


def _plan(scenario: Scenario, config: SimConfig, forecast: Rates) -> DeploymentPlan:
    instance = scenario.instance(forecast, config.objective, _MODE[config.policy])
    return solve(instance)


def _usable(plan: DeploymentPlan) -> bool:
    return plan.status == "optimal" or (plan.status == "time_limit" and bool(plan.alloc_peak))


@dataclass
class EpochStep:
    plan: DeploymentPlan | None  # None when planning failed and the previous plan stays
    forecast: Rates
    predictor: PredictorState
    status: str


def step_epoch(cluster: ClusterState, predictor: PredictorState, planner: Callable[[Rates], DeploymentPlan],
               trace: DemandTrace, epoch: int, config: SimConfig, ctx: SimContext, warm: bool = False) -> EpochStep:
    """Forecast epoch ``epoch``, plan for it and reconcile ``cluster`` at the epoch start.

    The EWMA predictor sees demand up to the previous epoch; the first epoch
    starts from its own observed demand. ``warm`` deploys the plan instantly.
    """
    t0 = epoch * _bins_per(config.epoch_length, trace.resolution, "epoch length") * trace.resolution
    if config.predictor == "oracle":
        forecast = aggregate_epoch(trace, epoch, config.epoch_length)
    else:
        seen = aggregate_epoch(trace, max(epoch - 1, 0), config.epoch_length)
        predictor = ewma_predict(predictor, seen)
        forecast = dict(predictor.forecast)
    cluster.activate(t0)
    plan = planner(forecast)
    if not _usable(plan):
        return EpochStep(None, forecast, predictor, plan.status)
    cluster.reconcile(plan.instance_counts, t0, ctx.models, ctx.budgets, warm=warm)
    return EpochStep(plan, forecast, predictor, plan.status)


def run_simulation(trace: DemandTrace, config: SimConfig, scenario: Scenario) -> SimMetrics:
    """Simulate ``trace`` under ``config``; deterministic for identical inputs."""
    ctx = SimContext(scenario, trace.pairs)
    metrics = SimMetrics(sorted(ctx.resources), policy=config.policy)
    if trace.num_bins == 0:
        return metrics
    res = trace.resolution
    per_epoch = _bins_per(config.epoch_length, res, "epoch length")
    window = _bins_per(config.autoscale_window, res, "autoscale window") if config.autoscale else 0
    static = None
    if config.policy == "static":
        static = config.static_plan or scenario.static_plan(trace.peak_rates())
        planner = lambda forecast: static  # noqa: E731
    else:
        planner = lambda forecast: _plan(scenario, config, forecast)  # noqa: E731
    cluster = ClusterState(provisioning_delay=config.provisioning_delay, spare_fraction=config.spare_fraction)
    predictor = PredictorState(config.ewma_alpha)
    plan: DeploymentPlan | None = None
    weights: dict = {}
    rates = {p: trace.rates(p) for p in trace.pairs}

    for e in range(num_epochs(trace, config.epoch_length)):
        lo, hi = e * per_epoch, min((e + 1) * per_epoch, trace.num_bins)
        t0 = lo * res
        step = step_epoch(cluster, predictor, planner, trace, e, config, ctx, warm=plan is None)
        predictor, forecast, status = step.predictor, step.forecast, step.status
        if step.plan is not None:
            plan = step.plan
            weights = routing_weights(plan)
        reoptimized = False
        acc = BinMetrics()
        unit_time: dict[str, float] = {g: 0.0 for g in metrics.resources}
        unit_peak: dict[str, float] = {g: 0.0 for g in metrics.resources}
        window_load: dict[str, float] = {}
        to_date = {p: 0.0 for p in trace.pairs}
        for i in range(lo, hi):
            t = i * res
            cluster.activate(t)
            demand = {p: float(rates[p][i]) for p in trace.pairs}
            b = route_and_account(cluster, weights, demand, ctx, res)
            for name in ("energy_kwh", "cost", "violations", "dropped", "shadow_dropped", "requests",
                         "served_tokens", "capacity_tokens"):
                setattr(acc, name, getattr(acc, name) + getattr(b, name))
            for g, u in b.units.items():
                unit_time[g] = unit_time.get(g, 0.0) + u * res
                unit_peak[g] = max(unit_peak.get(g, 0.0), float(u))
            if config.record_bins:
                metrics.bins.append(BinRecord(
                    t, res, dict(cluster.active), {m: cluster.pending_count(m) for m in {p.model for p in cluster.pending}},
                    dict(cluster.spare), dict(b.offered_by_model), b.energy_kwh, b.cost,
                ))
            for m, load in b.load_by_model.items():
                window_load[m] = window_load.get(m, 0.0) + load
            if window and (i - lo + 1) % window == 0:
                avg_load = {m: v / window for m, v in window_load.items()}
                decisions = autoscale(cluster, avg_load, ctx.models, config.autoscale_threshold, ctx.budgets)
                cluster.apply(decisions, t + res, ctx.models)
                window_load = {}
            for p in trace.pairs:
                to_date[p] = max(to_date[p], demand[p])
            if (config.early_reopt and static is None and not reoptimized and i + 1 < hi
                    and any(to_date[p] > (1 + config.early_reopt_threshold) * forecast.get(p, (0.0, 0.0))[0]
                            for p in trace.pairs)):
                bumped = {p: (max(forecast.get(p, (0.0, 0.0))[0], to_date[p]), forecast.get(p, (0.0, 0.0))[1])
                          for p in trace.pairs}
                new = _plan(scenario, config, bumped)
                reoptimized = True
                if _usable(new):
                    plan = new
                    weights = routing_weights(plan)
                    cluster.reconcile(plan.instance_counts, t + res, ctx.models, ctx.budgets)
        span = (hi - lo) * res
        metrics.epochs.append(EpochMetrics(
            epoch=e,
            start=t0,
            gpus_by_type={g: unit_time.get(g, 0.0) / span for g in metrics.resources},
            peak_gpus_by_type={g: unit_peak.get(g, 0.0) for g in metrics.resources},
            energy_kwh=acc.energy_kwh,
            cost=acc.cost,
            violations=acc.violations,
            dropped=acc.dropped,
            requests=acc.requests,
            shadow_dropped=acc.shadow_dropped,
            served_tokens=acc.served_tokens,
            capacity_tokens=acc.capacity_tokens,
            status=status,
            reoptimized=reoptimized,
            instance_counts={k: v for k, v in (plan.instance_counts if plan else {}).items() if v},
        ))
    return metrics


@dataclass(frozen=True)
class SweepRow:
    interval: float
    total_cost: float
    total_energy_kwh: float
    mean_utilization: float
    under_prediction_fraction: float


def epoch_sensitivity_sweep(trace: DemandTrace, intervals: Sequence[float], scenario: Scenario,
                            base: SimConfig | None = None) -> list[SweepRow]:
    """One run per optimization interval with the auto-scaler and early re-optimization off,
    so dropped requests measure pure forecast error."""
    base = base or SimConfig()
    rows = []
    for interval in intervals:
        _bins_per(interval, trace.resolution, "interval")
        cfg = dataclasses.replace(base, epoch_length=float(interval), autoscale=False, early_reopt=False,
                                  record_bins=False)
        m = run_simulation(trace, cfg, scenario)
        rows.append(SweepRow(float(interval), m.cost, m.energy_kwh, m.mean_utilization, m.under_prediction_fraction))
    return rows
