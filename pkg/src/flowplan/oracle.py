"""Brute-force reference solver for small planning instances.

Shares no code with the MILP path beyond the data classes: SLO filtering is
re-derived here, instance-count vectors are enumerated exhaustively and every
allocation question is answered by an exact rational simplex.

Two structural facts keep enumeration cheap. The average-load allocation never
touches instance counts, so it is one LP solved once. For peak load, a pair
routed to a model only ever needs that model's lowest-token admissible config,
so peak feasibility for fixed counts is a small transportation problem.
"""

from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction
from typing import Sequence

from .optimizer import Demand, DeploymentPlan, OptimizationInstance
from .profiles import LoadPoint, ModelProfile, ResourceType, SloSpec, TokenStats, WorkflowConfig


class OracleBoundsError(ValueError):
    """The instance is too large to enumerate."""


F = Fraction


# -- exact simplex -------------------------------------------------------------


def exact_lp(c: Sequence, A_ub: Sequence[Sequence] = (), b_ub: Sequence = (),
             A_eq: Sequence[Sequence] = (), b_eq: Sequence = ()):
    """Minimize ``c @ x`` over ``x >= 0`` with two-phase simplex in rational arithmetic.

    Returns ``(status, value, x)`` with status ``optimal``, ``infeasible`` or ``unbounded``.
    Bland's rule prevents cycling.
    """
    n = len(c)
    rows = [(a, b, True) for a, b in zip(A_ub, b_ub)] + [(a, b, False) for a, b in zip(A_eq, b_eq)]
    m = len(rows)
    ns = len(A_ub)
    width = n + ns + m
    T: list[list[Fraction]] = []
    slack = 0
    for i, (a, b, is_ub) in enumerate(rows):
        row = [F(v) for v in a] + [F(0)] * (ns + m) + [F(b)]
        if is_ub:
            row[n + slack] = F(1)
            slack += 1
        if row[-1] < 0:
            row = [-v for v in row]
        row[n + ns + i] = F(1)
        T.append(row)
    basis = [n + ns + i for i in range(m)]

    def pivot(r: int, col: int):
        p = T[r][col]
        T[r] = [v / p for v in T[r]]
        for i in range(m):
            if i != r and T[i][col] != 0:
                f = T[i][col]
                T[i] = [vi - f * vr for vi, vr in zip(T[i], T[r])]
        basis[r] = col

    def run(cost: list[Fraction], allowed: int) -> str:
        while True:
            cb = [cost[b] for b in basis]
            in_basis = set(basis)
            enter = None
            for j in range(allowed):
                if j in in_basis:
                    continue
                reduced = cost[j] - sum(cb[i] * T[i][j] for i in range(m) if T[i][j] != 0)
                if reduced < 0:
                    enter = j
                    break
            if enter is None:
                return "optimal"
            leave = None
            for i in range(m):
                if T[i][enter] > 0:
                    ratio = T[i][-1] / T[i][enter]
                    if leave is None or ratio < leave[0] or (ratio == leave[0] and basis[i] < basis[leave[1]]):
                        leave = (ratio, i)
            if leave is None:
                return "unbounded"
            pivot(leave[1], enter)

    phase1 = [F(0)] * (n + ns) + [F(1)] * m
    run(phase1, width)
    if sum(T[i][-1] for i in range(m) if basis[i] >= n + ns) > 0:
        return "infeasible", None, None
    # drive remaining (zero-valued) artificials out of the basis
    for i in range(m):
        if basis[i] >= n + ns:
            for j in range(n + ns):
                if T[i][j] != 0:
                    pivot(i, j)
                    break
    keep = [i for i in range(m) if basis[i] < n + ns]
    T[:] = [T[i] for i in keep]
    basis[:] = [basis[i] for i in keep]
    m = len(T)
    cost = [F(v) for v in c] + [F(0)] * (ns + (width - n - ns))
    if run(cost, n + ns) == "unbounded":
        return "unbounded", None, None
    x = [F(0)] * (n + ns)
    for i, b in enumerate(basis):
        x[b] = T[i][-1]
    value = sum(F(ci) * xi for ci, xi in zip(c, x[:n]))
    return "optimal", value, x[:n]


# -- brute force ---------------------------------------------------------------


def _admissible(d: Demand, c: WorkflowConfig, m: ModelProfile) -> bool:
    s = d.slo
    if s.slo_type == "max_accuracy" and c.accuracy < s.threshold:
        return False
    if s.min_accuracy is not None and c.accuracy < s.min_accuracy:
        return False
    if s.slo_type == "min_latency" and m.ttft + c.tokens_per_request.p95 * m.tpot > s.threshold:
        return False
    return True


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def brute_force_solve(instance: OptimizationInstance, max_models: int = 4,
                      max_vectors: int = 250_000) -> DeploymentPlan:
    """Globally optimal plan by exhaustive enumeration of instance counts."""
    inst = instance
    alpha = F(inst.buffer)
    models = sorted(inst.models, key=lambda m: m.key)
    if len(models) > max_models:
        raise OracleBoundsError(f"{len(models)} model profiles exceed the oracle limit of {max_models}")
    zero = {m.key: 0 for m in models}
    tuples = []  # (demand, config, model)
    for d in inst.demands:
        found = False
        for c in inst.configs:
            if c.workflow_name != d.workflow:
                continue
            for m in models:
                if m.model_name in c.compatible_models and _admissible(d, c, m):
                    tuples.append((d, c, m))
                    found = True
        if not found and (d.peak > 0 or d.avg > 0):
            return DeploymentPlan("infeasible", dict(zero))

    def unit_cost(c, m):
        rate = F(inst.resources[m.resource_type].cost_per_unit_second)
        return F(c.tokens_per_request.mean) / F(m.sustainable_tps) * m.parallelism * rate

    # average side
    nv = len(tuples)
    A, b = [], []
    for d in inst.demands:
        mask = [1 if t[0] is d else 0 for t in tuples]
        A.append([-v for v in mask]); b.append(-F(d.avg))
        A.append(mask); b.append(alpha * F(d.avg))
    if inst.has_cost_slo:
        tau: dict[str, Fraction] = {}
        for d in inst.demands:
            if d.slo.slo_type == "max_cost":
                tau[d.workflow] = min(tau.get(d.workflow, F(d.slo.threshold)), F(d.slo.threshold))
        A.append([unit_cost(c, m) for _, c, m in tuples])
        b.append(sum(t * sum(F(d.avg) for d in inst.demands if d.workflow == w) for w, t in tau.items()))
    if inst.objective == "max_accuracy_under_budget":
        total = sum(F(d.avg) for d in inst.demands)
        cost = [(-F(c.accuracy) / total if total else F(0)) + F(inst.epsilon) * unit_cost(c, m)
                for _, c, m in tuples]
    else:
        cost = [F(0)] * nv
    status, avg_value, x_avg = exact_lp(cost, A, b) if nv else ("optimal", F(0), [])
    if status != "optimal":
        return DeploymentPlan("infeasible", dict(zero))

    # peak side: cheapest tokens per (pair, model)
    tmin: dict[tuple, tuple[Fraction, WorkflowConfig]] = {}
    for d, c, m in tuples:
        if d.peak <= 0:
            continue
        key = (d.pair, m.key)
        t = F(c.tokens_per_request.p95)
        if key not in tmin or t < tmin[key][0]:
            tmin[key] = (t, c)
    by_key = {m.key: m for m in models}
    peaks = {d.pair: F(d.peak) for d in inst.demands if d.peak > 0}

    def weight(m: ModelProfile) -> Fraction:
        if inst.objective == "min_energy":
            return F(m.energy_rate) * m.parallelism
        if inst.objective == "min_cost":
            return F(inst.resources[m.resource_type].cost_per_unit_second) * m.parallelism
        return F(0)

    def bound(m: ModelProfile, pairs) -> int:
        need = sum(F(inst.mu(m)) * peaks[p] * tmin[(p, m.key)][0] for p in pairs)
        ub = _ceil(need / F(m.sustainable_tps))
        budget = inst.budget(m.resource_type)
        if math.isfinite(budget):
            ub = min(ub, int(F(budget) / m.parallelism))
        return ub

    def within_budget(counts: dict[str, int]) -> bool:
        used: dict[str, int] = {}
        for k, n in counts.items():
            used[by_key[k].resource_type] = used.get(by_key[k].resource_type, 0) + n * by_key[k].parallelism
        return all(u <= F(inst.budget(g)) for g, u in used.items() if math.isfinite(inst.budget(g)))

    def objective(counts: dict[str, int]) -> Fraction:
        return sum(weight(by_key[k]) * n for k, n in counts.items())

    def lex(counts: dict[str, int]) -> tuple:
        return tuple(counts.get(m.key, 0) for m in models)

    if inst.mode == "joint":
        used = [m for m in models if any(k[1] == m.key for k in tmin)]
        ranges = [range(bound(m, [p for p in peaks if (p, m.key) in tmin]) + 1) for m in used]
        if math.prod(len(r) for r in ranges) > max_vectors:
            raise OracleBoundsError("too many instance-count vectors to enumerate")
        routes = sorted(tmin)

        def route(counts: dict[str, int]):
            A_ub = [[F(inst.mu(by_key[mk])) * tmin[(p, mk)][0] if mk == m.key else F(0) for p, mk in routes]
                    for m in used]
            b_ub = [F(counts[m.key]) * F(m.sustainable_tps) for m in used]
            A_eq = [[F(1) if p == q else F(0) for q, _ in routes] for p in peaks]
            b_eq = [peaks[p] for p in peaks]
            st, _, x = exact_lp([F(0)] * len(routes), A_ub, b_ub, A_eq, b_eq)
            return x if st == "optimal" else None

        candidates = []
        for vec in itertools.product(*ranges):
            counts = dict(zip((m.key for m in used), vec))
            if within_budget(counts):
                candidates.append((objective(counts), lex(counts), counts))
        candidates.sort(key=lambda t: (t[0], t[1]))
        failed: list[tuple] = []
        chosen = None
        for value, key, counts in candidates:
            vec = tuple(counts[m.key] for m in used)
            if any(all(a <= b for a, b in zip(vec, f)) for f in failed):
                continue
            x = route(counts) if routes else []
            if x is None:
                failed.append(vec)
                continue
            chosen = (value, counts, {r: x[i] for i, r in enumerate(routes)}, None)
            break
    else:
        options = []
        for p in peaks:
            pm = [by_key[k] for q, k in sorted(tmin) if q == p]
            ranges = [range(bound(m, [p]) + 1) for m in pm]
            if math.prod(len(r) for r in ranges) > max_vectors:
                raise OracleBoundsError("too many instance-count vectors to enumerate")
            feasible = []
            for vec in itertools.product(*ranges):
                served = sum(F(n) * F(m.sustainable_tps) / (F(inst.mu(m)) * tmin[(p, m.key)][0])
                             for n, m in zip(vec, pm))
                if served >= peaks[p]:
                    feasible.append(vec)
            minimal = [v for v in feasible
                       if not any(u != v and all(a <= b for a, b in zip(u, v)) for u in feasible)]
            options.append((p, pm, [dict(zip((m.key for m in pm), v)) for v in minimal]))
        combos = 1
        for _, _, opts in options:
            combos *= len(opts)
        if combos > max_vectors:
            raise OracleBoundsError("too many per-pair combinations to enumerate")
        chosen = None
        for combo in itertools.product(*(opts for _, _, opts in options)):
            union: dict[str, int] = {}
            for counts in combo:
                for k, n in counts.items():
                    union[k] = union.get(k, 0) + n
            if not within_budget(union):
                continue
            rank = (objective(union), lex(union))
            if chosen is None or rank < (chosen[0], lex(chosen[1])):
                chosen = (rank[0], union, None, {p: c for (p, _, _), c in zip(options, combo)})
    if chosen is None:
        return DeploymentPlan("infeasible", dict(zero))

    value, counts, routed, pair_counts = chosen
    plan_counts = dict(zero)
    plan_counts.update(counts)
    alloc_peak: dict = {}
    if routed is None:
        routed = {}
        for p, counts_p in pair_counts.items():
            remaining = peaks[p]
            for mk in sorted(counts_p):
                m = by_key[mk]
                cap = F(counts_p[mk]) * F(m.sustainable_tps) / (F(inst.mu(m)) * tmin[(p, mk)][0])
                take = min(cap, remaining)
                routed[(p, mk)] = take
                remaining -= take
    for (p, mk), x in routed.items():
        c = tmin[(p, mk)][1]
        if x:
            alloc_peak[(p[0], p[1], c.config_id, mk)] = float(x)
    alloc_avg = {}
    for (d, c, m), x in zip(tuples, x_avg):
        if x:
            alloc_avg[(d.workflow, d.slo_label, c.config_id, m.key)] = float(x)
    if inst.objective == "max_accuracy_under_budget":
        objective_value = float(-avg_value)
    else:
        objective_value = float(value)
    pc = None
    if inst.mode == "per_pair":
        pc = {d.pair: {} for d in inst.demands}
        for p, counts_p in (pair_counts or {}).items():
            pc[p] = {k: n for k, n in counts_p.items() if n}
    return DeploymentPlan("optimal", plan_counts, alloc_peak, alloc_avg, objective_value, 0.0, pc)


# -- random small instances ----------------------------------------------------


def random_instance(seed: int, objective: str | None = None, mode: str | None = None) -> OptimizationInstance:
    """A small seeded instance inside the oracle's enumeration limits."""
    rng = random.Random(seed)
    inf = math.inf
    resources = {
        "A100": ResourceType("A100", 3.40 / 3600, rng.choice([4, 8, 16, 32, inf]), 90.0),
        "H100": ResourceType("H100", 12.29 / 3600, rng.choice([2, 4, 8, 16, inf]), 120.0),
    }
    models = []
    for name in ("Ma", "Mb", "Mc")[: rng.randint(1, 3)]:
        g = rng.choice([1, 2, 4])
        theta = float(rng.randrange(400, 2001, 25))
        curve = (
            LoadPoint(0.0, round(rng.uniform(0.05, 0.2), 3), round(rng.uniform(0.004, 0.02), 4), 100.0),
            LoadPoint(theta, round(rng.uniform(0.2, 0.6), 3), round(rng.uniform(0.02, 0.08), 4),
                      float(rng.randrange(250, 700, 10))),
        )
        models.append(ModelProfile(name, rng.choice(["A100", "H100"]), g, curve))
    names = [m.model_name for m in models]
    configs = []
    demands = []
    for w in ("wa", "wb")[: rng.randint(1, 2)]:
        wconfigs = []
        for i in range(rng.randint(1, 4)):
            p95 = rng.randrange(100, 801, 10)
            p50 = rng.randrange(50, p95 + 1, 10)
            tokens = TokenStats(p50, p95, p95 + rng.randrange(0, 200, 10), (p50 + p95) / 2)
            compat = tuple(sorted(rng.sample(names, rng.randint(1, len(names)))))
            wconfigs.append(WorkflowConfig(w, f"c{i}", round(rng.uniform(0.4, 0.95), 3), tokens, compat))
        configs.extend(wconfigs)
        for s in range(rng.randint(1, 2)):
            kind = rng.choices(["max_accuracy", "min_latency", "max_cost"], [0.45, 0.4, 0.15])[0]
            if kind == "max_accuracy":
                slo = SloSpec(kind, rng.choices([rng.choice([c.accuracy for c in wconfigs]), 0.0, 0.97], [0.8, 0.12, 0.08])[0])
            elif kind == "min_latency":
                lat = sorted(m.ttft + c.tokens_per_request.p95 * m.tpot for c in wconfigs for m in models
                             if m.model_name in c.compatible_models)
                slo = SloSpec(kind, round(rng.uniform(lat[0] * 0.95, lat[-1] * 1.2), 3),
                              min_accuracy=rng.choice([None, None, 0.45]))
            else:
                slo = SloSpec(kind, round(rng.uniform(1e-4, 3e-3), 7))
            peak = rng.choice([0.0, round(rng.uniform(0.05, 1.0), 3), round(rng.uniform(0.05, 1.0), 3)])
            avg = round(peak * rng.uniform(0.3, 1.0), 4)
            demands.append(Demand(w, f"s{s}", slo, peak, avg))
    multiplex = {m.key: rng.choice([1.0, 1.0, 1.25]) for m in models}
    return OptimizationInstance(
        configs, models, resources, demands,
        buffer=rng.choice([1.0, 1.15, 1.3]),
        objective=objective or rng.choice(["min_energy", "min_cost", "max_accuracy_under_budget"]),
        mode=mode or rng.choice(["joint", "per_pair"]),
        multiplex=multiplex,
        time_limit=30.0,
    )
