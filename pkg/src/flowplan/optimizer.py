"""Deployment planning MILP.

Decision variables, per admissible (workflow, SLO label, config, model profile)
tuple ``k``: peak and average request rates ``x_peak[k]``, ``x_avg[k]``; per
model profile: an integer instance count ``n``. Constraints:

* demand with buffer: ``lam <= sum_k x[k] <= alpha * lam`` for peak and average
* capacity: ``mu_m * sum_k x_peak[k] * t95_c <= n_m * theta_m``
* SLO filters: tuples violating an accuracy or latency threshold are never created
* cost budget, when some workflow carries a cost SLO:
  ``sum_k x_avg[k] * (tmean_c / theta_m) * g_m * c_g <= sum_w tau_w * sum_s lam_avg[w, s]``
* resource budget: ``sum_{m on g} n_m * g_m <= B_g``

Objectives: ``min_energy`` (kWh per hour), ``min_cost`` ($ per second) and
``max_accuracy_under_budget`` (request-weighted accuracy minus ``epsilon`` times
the cost-budget left-hand side).

``joint`` mode shares one instance pool across all (workflow, SLO) pairs.
``per_pair`` gives each pair a private pool while budgets stay shared, and the
plan reports the union.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .milp import MilpProblem, MilpResult, solve_lp, solve_milp
from .profiles import (
    ModelProfile,
    ResourceType,
    SloSpec,
    WorkflowConfig,
    model_from_dict,
    model_to_dict,
    parse_resources,
    resource_to_dict,
    workflow_from_dict,
    workflow_to_dict,
)

OBJECTIVES = ("min_energy", "min_cost", "max_accuracy_under_budget")
MODES = ("joint", "per_pair")
CONSTRAINT_IDS = (
    "demand_peak", "demand_avg", "capacity", "slo_accuracy", "slo_latency", "cost_budget", "resource_budget",
)
CAPACITY_PERCENTILE = "p95"
COST_PERCENTILE = "mean"

# (workflow, slo_label, config_id, model_key)
AllocKey = tuple[str, str, str, str]
Pair = tuple[str, str]


class InstanceError(ValueError):
    """An optimization instance breaks one of its invariants."""


@dataclass(frozen=True)
class Demand:
    workflow: str
    slo_label: str
    slo: SloSpec
    peak: float
    avg: float

    @property
    def pair(self) -> Pair:
        return (self.workflow, self.slo_label)


@dataclass
class OptimizationInstance:
    configs: Sequence[WorkflowConfig]
    models: Sequence[ModelProfile]
    resources: Mapping[str, ResourceType]
    demands: Sequence[Demand]
    budgets: Mapping[str, float] = field(default_factory=dict)
    buffer: float = 1.15
    objective: str = "min_energy"
    epsilon: float = 0.001
    mode: str = "joint"
    time_limit: float = 300.0
    multiplex: Mapping[str, float] = field(default_factory=dict)
    backend: str = "highs"

    def __post_init__(self):
        self.configs = tuple(self.configs)
        self.models = tuple(sorted(self.models, key=lambda m: m.key))
        self.demands = tuple(self.demands)
        if self.objective not in OBJECTIVES:
            raise InstanceError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.mode not in MODES:
            raise InstanceError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.buffer >= 1:
            raise InstanceError("buffer alpha must be >= 1")
        if not self.epsilon >= 0:
            raise InstanceError("epsilon must be >= 0")
        if not self.time_limit > 0:
            raise InstanceError("time_limit must be positive")
        keys = [m.key for m in self.models]
        if len(set(keys)) != len(keys):
            raise InstanceError("duplicate model profile keys")
        for m in self.models:
            if m.resource_type not in self.resources:
                raise InstanceError(f"model {m.key} uses unknown resource {m.resource_type!r}")
        ckeys = [c.key for c in self.configs]
        if len(set(ckeys)) != len(ckeys):
            raise InstanceError("duplicate workflow configs")
        workflows = {c.workflow_name for c in self.configs}
        pairs = set()
        for d in self.demands:
            if d.pair in pairs:
                raise InstanceError(f"duplicate demand pair {d.pair}")
            pairs.add(d.pair)
            if d.workflow not in workflows:
                raise InstanceError(f"demand for unknown workflow {d.workflow!r}")
            if not (0 <= d.avg <= d.peak) or math.isinf(d.peak):
                raise InstanceError(f"demand {d.pair}: need 0 <= avg <= peak < inf")
        for g, b in self.budgets.items():
            if g not in self.resources:
                raise InstanceError(f"budget for unknown resource {g!r}")
            if not b >= 0:
                raise InstanceError(f"budget for {g!r} must be >= 0")
        for k, mu in self.multiplex.items():
            if k not in keys:
                raise InstanceError(f"multiplex factor for unknown model {k!r}")
            if not mu > 0:
                raise InstanceError(f"multiplex factor for {k!r} must be > 0")

    def budget(self, resource: str) -> float:
        return float(self.budgets.get(resource, self.resources[resource].capacity))

    def mu(self, model: ModelProfile) -> float:
        return float(self.multiplex.get(model.key, model.multiplex_factor))

    def config(self, workflow: str, config_id: str) -> WorkflowConfig:
        for c in self.configs:
            if c.key == (workflow, config_id):
                return c
        raise KeyError((workflow, config_id))

    def model(self, key: str) -> ModelProfile:
        for m in self.models:
            if m.key == key:
                return m
        raise KeyError(key)

    def demand(self, pair: Pair) -> Demand:
        for d in self.demands:
            if d.pair == pair:
                return d
        raise KeyError(pair)

    def replace(self, **changes) -> "OptimizationInstance":
        return dataclasses.replace(self, **changes)

    @property
    def has_cost_slo(self) -> bool:
        return any(d.slo.slo_type == "max_cost" for d in self.demands)

    def cost_budget(self) -> float:
        """Right-hand side of the cost constraint, in $ per second."""
        tau: dict[str, float] = {}
        for d in self.demands:
            if d.slo.slo_type == "max_cost":
                tau[d.workflow] = min(tau.get(d.workflow, math.inf), d.slo.threshold)
        return sum(t * sum(d.avg for d in self.demands if d.workflow == w) for w, t in tau.items())

    def unit_cost(self, config: WorkflowConfig, model: ModelProfile) -> float:
        """$ per second spent serving one request/second of ``config`` on ``model``."""
        rate = self.resources[model.resource_type].cost_per_unit_second
        return config.tokens_per_request[COST_PERCENTILE] / model.sustainable_tps * model.parallelism * rate

    def total_avg_demand(self) -> float:
        return sum(d.avg for d in self.demands)


@dataclass(frozen=True)
class ConstraintViolation:
    constraint_id: str
    tuple: tuple
    slack: float


@dataclass
class DeploymentPlan:
    status: str
    instance_counts: dict[str, int] = field(default_factory=dict)
    alloc_peak: dict[AllocKey, float] = field(default_factory=dict)
    alloc_avg: dict[AllocKey, float] = field(default_factory=dict)
    objective_value: float | None = None
    gap: float = 0.0
    # private pools in per_pair mode
    pair_counts: dict[Pair, dict[str, int]] | None = None
    diagnosis: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        keys = sorted(set(self.alloc_peak) | set(self.alloc_avg))
        doc = {
            "status": self.status,
            "objective_value": self.objective_value,
            "gap": None if math.isinf(self.gap) else self.gap,
            "instance_counts": dict(sorted(self.instance_counts.items())),
            "allocations": [
                {"workflow": k[0], "slo": k[1], "config": k[2], "model": k[3],
                 "peak": self.alloc_peak.get(k, 0.0), "avg": self.alloc_avg.get(k, 0.0)}
                for k in keys
            ],
            "diagnosis": dict(self.diagnosis),
        }
        if self.pair_counts is not None:
            doc["pair_counts"] = [
                {"workflow": p[0], "slo": p[1], "counts": dict(sorted(c.items()))}
                for p, c in sorted(self.pair_counts.items())
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "DeploymentPlan":
        peak, avg = {}, {}
        for a in doc.get("allocations", []):
            k = (a["workflow"], a["slo"], a["config"], a["model"])
            peak[k] = float(a.get("peak", 0.0))
            avg[k] = float(a.get("avg", 0.0))
        pair_counts = None
        if "pair_counts" in doc:
            pair_counts = {(p["workflow"], p["slo"]): {m: int(n) for m, n in p["counts"].items()}
                           for p in doc["pair_counts"]}
        gap = doc.get("gap")
        return cls(
            status=doc["status"],
            instance_counts={m: int(n) for m, n in doc.get("instance_counts", {}).items()},
            alloc_peak=peak,
            alloc_avg=avg,
            objective_value=doc.get("objective_value"),
            gap=math.inf if gap is None else float(gap),
            pair_counts=pair_counts,
            diagnosis=dict(doc.get("diagnosis", {})),
        )


# -- SLO filtering -------------------------------------------------------------


def latency_estimate(config: WorkflowConfig, model: ModelProfile) -> float:
    """LLM-stage latency at sustainable load, as used by the latency filter."""
    return model.ttft + config.tokens_per_request[CAPACITY_PERCENTILE] * model.tpot


def admissibility(demand: Demand, config: WorkflowConfig, model: ModelProfile) -> tuple[str, float] | None:
    """``None`` if the tuple is admissible, else ``(constraint_id, signed slack)``.

    Incompatible (config, model) pairs are not tuples at all and raise ``ValueError``.
    """
    if model.model_name not in config.compatible_models:
        raise ValueError(f"model {model.key} is not compatible with {config.config_id}")
    slo = demand.slo
    if slo.slo_type == "max_accuracy" and config.accuracy < slo.threshold:
        return "slo_accuracy", config.accuracy - slo.threshold
    if slo.min_accuracy is not None and config.accuracy < slo.min_accuracy:
        return "slo_accuracy", config.accuracy - slo.min_accuracy
    if slo.slo_type == "min_latency":
        latency = latency_estimate(config, model)
        if latency > slo.threshold:
            return "slo_latency", latency - slo.threshold
    return None


def _candidates(instance: OptimizationInstance, demand: Demand) -> Iterable[tuple[WorkflowConfig, ModelProfile]]:
    for c in instance.configs:
        if c.workflow_name != demand.workflow:
            continue
        for m in instance.models:
            if m.model_name in c.compatible_models:
                yield c, m


def filter_feasible(instance: OptimizationInstance) -> list[AllocKey]:
    """Admissible (workflow, SLO label, config, model key) tuples in a deterministic order."""
    return [
        (d.workflow, d.slo_label, c.config_id, m.key)
        for d in instance.demands
        for c, m in _candidates(instance, d)
        if admissibility(d, c, m) is None
    ]


def diagnose(instance: OptimizationInstance) -> dict[str, str]:
    """For each pair with positive demand and no admissible tuple, say which filter emptied it."""
    out = {}
    for d in instance.demands:
        if d.peak <= 0 and d.avg <= 0:
            continue
        cands = list(_candidates(instance, d))
        if not cands:
            out[f"{d.workflow}/{d.slo_label}"] = "no compatible model profile in the instance"
            continue
        reasons = [admissibility(d, c, m) for c, m in cands]
        if any(r is None for r in reasons):
            continue
        label = f"{d.workflow}/{d.slo_label}"
        if all(r[0] == "slo_accuracy" for r in reasons):
            best = max(c.accuracy for c, _ in cands)
            out[label] = f"accuracy filter: best available accuracy {best:.4g} is below the threshold"
        elif all(r[0] == "slo_latency" for r in reasons):
            fastest = min(latency_estimate(c, m) for c, m in cands)
            out[label] = f"latency filter: fastest option takes {fastest:.4g} s, above {d.slo.threshold:.4g} s"
        else:
            out[label] = "accuracy and latency filters together remove every option"
    return out


# -- formulation ---------------------------------------------------------------


class _Formulation:
    def __init__(self, instance: OptimizationInstance):
        self.inst = instance
        self.keys = filter_feasible(instance)
        self.nk = len(self.keys)
        inst = instance
        self.cfg = {k: inst.config(k[0], k[2]) for k in self.keys}
        self.mdl = {k: inst.model(k[3]) for k in self.keys}
        if inst.mode == "joint":
            self.nvars = [m.key for m in inst.models if any(k[3] == m.key for k in self.keys)]
        else:
            self.nvars = sorted({((k[0], k[1]), k[3]) for k in self.keys},
                                key=lambda v: ([d.pair for d in inst.demands].index(v[0]), v[1]))
        self.size = 2 * self.nk + len(self.nvars)
        self.rows: list[tuple[np.ndarray, float, float]] = []
        self._build()

    def xp(self, i: int) -> int:
        return i

    def xa(self, i: int) -> int:
        return self.nk + i

    def nv(self, j: int) -> int:
        return 2 * self.nk + j

    def n_model(self, var) -> ModelProfile:
        return self.inst.model(var if self.inst.mode == "joint" else var[1])

    def _n_index(self, k: AllocKey) -> int:
        var = k[3] if self.inst.mode == "joint" else ((k[0], k[1]), k[3])
        return self.nv(self.nvars.index(var))

    def _build(self):
        inst, alpha = self.inst, self.inst.buffer
        for d in inst.demands:
            idx = [i for i, k in enumerate(self.keys) if (k[0], k[1]) == d.pair]
            for offset, lam in ((0, d.peak), (self.nk, d.avg)):
                row = np.zeros(self.size)
                row[[offset + i for i in idx]] = 1.0
                self.rows.append((row, lam, alpha * lam))
        # capacity, scaled by 1/theta so rows read in instances
        for j, var in enumerate(self.nvars):
            m = self.n_model(var)
            row = np.zeros(self.size)
            for i, k in enumerate(self.keys):
                if self._n_index(k) == self.nv(j):
                    row[self.xp(i)] = inst.mu(m) * self.cfg[k].tokens_per_request[CAPACITY_PERCENTILE] / m.sustainable_tps
            row[self.nv(j)] = -1.0
            self.rows.append((row, -math.inf, 0.0))
        if inst.has_cost_slo:
            self.rows.append((self.cost_row(), -math.inf, inst.cost_budget()))
        for g in sorted(inst.resources):
            b = inst.budget(g)
            if math.isinf(b):
                continue
            row = np.zeros(self.size)
            for j, var in enumerate(self.nvars):
                m = self.n_model(var)
                if m.resource_type == g:
                    row[self.nv(j)] = m.parallelism
            if row.any():
                self.rows.append((row, -math.inf, b))

    def cost_row(self) -> np.ndarray:
        row = np.zeros(self.size)
        for i, k in enumerate(self.keys):
            row[self.xa(i)] = self.inst.unit_cost(self.cfg[k], self.mdl[k])
        return row

    def objective(self) -> np.ndarray:
        """Coefficients of the minimized objective (negated for the accuracy objective)."""
        inst = self.inst
        c = np.zeros(self.size)
        if inst.objective == "max_accuracy_under_budget":
            total = inst.total_avg_demand()
            for i, k in enumerate(self.keys):
                acc = self.cfg[k].accuracy / total if total > 0 else 0.0
                c[self.xa(i)] = -acc
            c += inst.epsilon * self.cost_row()
            return c
        for j, var in enumerate(self.nvars):
            m = self.n_model(var)
            if inst.objective == "min_energy":
                c[self.nv(j)] = m.energy_rate * m.parallelism
            else:
                c[self.nv(j)] = m.parallelism * inst.resources[m.resource_type].cost_per_unit_second
        return c

    def n_upper_bounds(self) -> np.ndarray:
        """Per-variable bound: the resource budget, or enough to serve all buffered demand alone."""
        inst = self.inst
        ub = np.zeros(len(self.nvars))
        for j, var in enumerate(self.nvars):
            m = self.n_model(var)
            tmax: dict[Pair, float] = {}
            for k in self.keys:
                if self._n_index(k) == self.nv(j):
                    t = self.cfg[k].tokens_per_request[CAPACITY_PERCENTILE]
                    tmax[(k[0], k[1])] = max(tmax.get((k[0], k[1]), 0.0), t)
            need = sum(inst.buffer * inst.demand(p).peak * t for p, t in tmax.items())
            bound = math.ceil(inst.mu(m) * need / m.sustainable_tps * (1 + 1e-12))
            budget = inst.budget(m.resource_type)
            if math.isfinite(budget):
                bound = min(bound, math.floor(budget / m.parallelism + 1e-9))
            ub[j] = bound
        return ub

    def problem(self) -> MilpProblem:
        if self.rows:
            A = np.vstack([r[0] for r in self.rows])
            lo = np.array([r[1] for r in self.rows])
            hi = np.array([r[2] for r in self.rows])
        else:
            A, lo, hi = np.zeros((0, self.size)), np.zeros(0), np.zeros(0)
        lb = np.zeros(self.size)
        ub = np.full(self.size, math.inf)
        ub[2 * self.nk:] = self.n_upper_bounds()
        integrality = np.zeros(self.size, dtype=bool)
        integrality[2 * self.nk:] = True
        return MilpProblem(self.objective(), A, lo, hi, lb, ub, integrality)

    def union_row(self, model_key: str) -> np.ndarray:
        row = np.zeros(self.size)
        for j, var in enumerate(self.nvars):
            if self.n_model(var).key == model_key:
                row[self.nv(j)] = 1.0
        return row


def _tol(z: float) -> float:
    return 1e-7 * max(1.0, abs(z))


def _tie_break(form: _Formulation, problem: MilpProblem, result: MilpResult, time_limit: float) -> MilpResult:
    """Among optima, pick the lexicographically smallest union count vector in model-key order."""
    z = result.fun
    problem = problem.with_row(problem.c, -math.inf, z + _tol(z))
    current = result
    for m in form.inst.models:
        row = form.union_row(m.key)
        if not row.any():
            continue
        value = round(float(row @ current.x))
        if value > 0:
            trial = solve_milp(problem.with_objective(row), form.inst.backend, time_limit)
            if trial.status == "optimal":
                current = trial
                value = round(float(row @ trial.x))
        problem = problem.with_row(row, -math.inf, value)
    return current


def _final_allocation(form: _Formulation, problem: MilpProblem, n: np.ndarray) -> np.ndarray | None:
    """Re-solve the continuous part with counts fixed, preferring the smallest total allocation."""
    lb, ub = problem.lb.copy(), problem.ub.copy()
    lb[2 * form.nk:] = n
    ub[2 * form.nk:] = n
    fixed = problem.with_bounds(lb, ub)
    if form.inst.objective == "max_accuracy_under_budget":
        res = solve_lp(fixed)
        if res.status != 0:
            return None
        fixed = fixed.with_row(fixed.c, -math.inf, res.fun + 1e-9 * max(1.0, abs(res.fun)))
    total = np.zeros(form.size)
    total[: 2 * form.nk] = 1.0
    res = solve_lp(fixed.with_objective(total))
    if res.status != 0:
        return None
    x = np.maximum(res.x, 0.0)
    x[2 * form.nk:] = n
    return x


def _plan_from_vector(form: _Formulation, x: np.ndarray, status: str, gap: float) -> DeploymentPlan:
    inst = form.inst
    counts = {m.key: 0 for m in inst.models}
    pair_counts = {d.pair: {} for d in inst.demands} if inst.mode == "per_pair" else None
    for j, var in enumerate(form.nvars):
        n = int(round(x[form.nv(j)]))
        m = form.n_model(var)
        counts[m.key] += n
        if pair_counts is not None and n:
            pair_counts[var[0]][m.key] = n
    alloc_peak = {k: float(x[form.xp(i)]) for i, k in enumerate(form.keys)}
    alloc_avg = {k: float(x[form.xa(i)]) for i, k in enumerate(form.keys)}
    obj = float(form.objective() @ x)
    if inst.objective == "max_accuracy_under_budget":
        obj = -obj
    return DeploymentPlan(status, counts, alloc_peak, alloc_avg, obj, gap, pair_counts)


def solve(instance: OptimizationInstance) -> DeploymentPlan:
    """Exactly solve the planning MILP and return a deterministic optimal plan."""
    reasons = diagnose(instance)
    if reasons:
        return DeploymentPlan("infeasible", {m.key: 0 for m in instance.models}, diagnosis=reasons)
    form = _Formulation(instance)
    problem = form.problem()
    if problem.num_vars == 0:
        # nothing admissible and nothing demanded
        return _plan_from_vector(form, np.zeros(0), "optimal", 0.0)
    result = solve_milp(problem, instance.backend, instance.time_limit)
    if result.status in ("infeasible", "unbounded", "error") or result.x is None:
        status = "time_limit" if result.status == "time_limit" else "infeasible"
        diag = {"solver": result.message or result.status}
        return DeploymentPlan(status, {m.key: 0 for m in instance.models}, gap=result.gap, diagnosis=diag)
    if result.status == "optimal":
        result = _tie_break(form, problem, result, instance.time_limit)
    n = result.x[2 * form.nk:]
    x = _final_allocation(form, problem, n)
    if x is None:
        # the MILP incumbent itself is the fallback
        x = result.x
    return _plan_from_vector(form, x, result.status, result.gap)


# -- validation and reporting --------------------------------------------------


def _violated(lhs: float, lo: float, hi: float) -> float | None:
    tol = 1e-9 * max(1.0, abs(lhs), abs(lo) if math.isfinite(lo) else 0.0, abs(hi) if math.isfinite(hi) else 0.0)
    if lhs < lo - tol:
        return lhs - lo
    if lhs > hi + tol:
        return lhs - hi
    return None


def validate_plan(instance: OptimizationInstance, plan: DeploymentPlan) -> list[ConstraintViolation]:
    """Every violated constraint with its signed slack (left-hand side minus the breached bound)."""
    out: list[ConstraintViolation] = []
    for m, n in plan.instance_counts.items():
        instance.model(m)
        if n != int(n) or n < 0:
            raise ValueError(f"instance count for {m} must be a non-negative integer, got {n!r}")
    keys = set(plan.alloc_peak) | set(plan.alloc_avg)
    for k in keys:
        if plan.alloc_peak.get(k, 0.0) < 0 or plan.alloc_avg.get(k, 0.0) < 0:
            raise ValueError(f"negative allocation for {k}")
    xp = lambda k: plan.alloc_peak.get(k, 0.0)  # noqa: E731
    xa = lambda k: plan.alloc_avg.get(k, 0.0)  # noqa: E731
    alpha = instance.buffer

    for d in instance.demands:
        mine = [k for k in keys if (k[0], k[1]) == d.pair]
        for cid, lam, f in (("demand_peak", d.peak, xp), ("demand_avg", d.avg, xa)):
            slack = _violated(sum(f(k) for k in mine), lam, alpha * lam)
            if slack is not None:
                out.append(ConstraintViolation(cid, d.pair, slack))
    for k in sorted(keys):
        if (k[0], k[1]) not in {d.pair for d in instance.demands}:
            raise ValueError(f"allocation for unknown pair {k[:2]}")
        if xp(k) <= 0 and xa(k) <= 0:
            continue
        verdict = admissibility(instance.demand((k[0], k[1])), instance.config(k[0], k[2]), instance.model(k[3]))
        if verdict is not None:
            out.append(ConstraintViolation(verdict[0], k, verdict[1]))

    def capacity_check(models_counts: Mapping[str, int], mine: Sequence[AllocKey], label: tuple):
        for m in instance.models:
            load = sum(
                instance.mu(m) * xp(k) * instance.config(k[0], k[2]).tokens_per_request[CAPACITY_PERCENTILE]
                for k in mine if k[3] == m.key
            )
            cap = models_counts.get(m.key, 0) * m.sustainable_tps
            slack = _violated(load, -math.inf, cap)
            if slack is not None:
                out.append(ConstraintViolation("capacity", label + (m.key,), slack))

    if plan.pair_counts is not None:
        union: dict[str, int] = {}
        for counts in plan.pair_counts.values():
            for m, n in counts.items():
                union[m] = union.get(m, 0) + n
        if {m: n for m, n in union.items() if n} != {m: n for m, n in plan.instance_counts.items() if n}:
            raise ValueError("instance_counts must equal the union of pair_counts")
        for d in instance.demands:
            capacity_check(plan.pair_counts.get(d.pair, {}), [k for k in keys if (k[0], k[1]) == d.pair], d.pair)
    else:
        capacity_check(plan.instance_counts, list(keys), ())

    if instance.has_cost_slo:
        spend = sum(xa(k) * instance.unit_cost(instance.config(k[0], k[2]), instance.model(k[3])) for k in keys)
        slack = _violated(spend, -math.inf, instance.cost_budget())
        if slack is not None:
            out.append(ConstraintViolation("cost_budget", (), slack))
    for g in sorted(instance.resources):
        used = sum(n * instance.model(m).parallelism for m, n in plan.instance_counts.items()
                   if instance.model(m).resource_type == g)
        slack = _violated(used, -math.inf, instance.budget(g))
        if slack is not None:
            out.append(ConstraintViolation("resource_budget", (g,), slack))
    return out


@dataclass(frozen=True)
class PlanReport:
    gpus_by_type: dict[str, float]
    energy_rate: float  # kWh per hour
    cost_rate: float  # $ per second
    mean_accuracy: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def plan_report(instance: OptimizationInstance, plan: DeploymentPlan) -> PlanReport:
    units = {g: 0.0 for g in sorted(instance.resources)}
    energy = cost = 0.0
    for key, n in plan.instance_counts.items():
        m = instance.model(key)
        units[m.resource_type] += n * m.parallelism
        energy += n * m.energy_rate * m.parallelism
        cost += n * m.parallelism * instance.resources[m.resource_type].cost_per_unit_second
    total = instance.total_avg_demand()
    weighted = sum(x * instance.config(k[0], k[2]).accuracy for k, x in plan.alloc_avg.items())
    return PlanReport(units, energy, cost, weighted / total if total > 0 else 0.0)


# -- JSON ----------------------------------------------------------------------


def slo_to_dict(slo: SloSpec) -> dict:
    return {"type": slo.slo_type, "threshold": slo.threshold, "tier": slo.tier, "min_accuracy": slo.min_accuracy}


def slo_from_dict(d: Mapping) -> SloSpec:
    floor = d.get("min_accuracy")
    return SloSpec(d["type"], float(d["threshold"]), d.get("tier"), None if floor is None else float(floor))


def instance_to_dict(inst: OptimizationInstance) -> dict:
    return {
        "resources": [resource_to_dict(r) for _, r in sorted(inst.resources.items())],
        "models": [model_to_dict(m) for m in inst.models],
        "workflows": [workflow_to_dict(c) for c in inst.configs],
        "demands": [
            {"workflow": d.workflow, "slo_label": d.slo_label, "slo": slo_to_dict(d.slo), "peak": d.peak, "avg": d.avg}
            for d in inst.demands
        ],
        "budgets": dict(inst.budgets),
        "buffer": inst.buffer,
        "objective": inst.objective,
        "epsilon": inst.epsilon,
        "mode": inst.mode,
        "time_limit": inst.time_limit,
        "multiplex": dict(inst.multiplex),
        "backend": inst.backend,
    }


def instance_from_dict(doc: Mapping) -> OptimizationInstance:
    try:
        return OptimizationInstance(
            configs=[workflow_from_dict(c) for c in doc["workflows"]],
            models=[model_from_dict(m) for m in doc["models"]],
            resources=parse_resources(doc["resources"], "instance.resources"),
            demands=[
                Demand(d["workflow"], d["slo_label"], slo_from_dict(d["slo"]), float(d["peak"]), float(d["avg"]))
                for d in doc["demands"]
            ],
            budgets={g: float(b) for g, b in doc.get("budgets", {}).items()},
            buffer=float(doc.get("buffer", 1.15)),
            objective=doc.get("objective", "min_energy"),
            epsilon=float(doc.get("epsilon", 0.001)),
            mode=doc.get("mode", "joint"),
            time_limit=float(doc.get("time_limit", 300.0)),
            multiplex={k: float(v) for k, v in doc.get("multiplex", {}).items()},
            backend=doc.get("backend", "highs"),
        )
    except KeyError as exc:
        raise InstanceError(f"instance is missing field {exc.args[0]!r}") from exc
