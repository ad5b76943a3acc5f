"""Mixed-integer LP backends over one dense problem form.

    minimize c @ x  subject to  lo <= A @ x <= hi,  lb <= x <= ub,  x[j] integer where integrality[j]

``highs`` delegates to :func:`scipy.optimize.milp`. ``bnb`` is a best-first
branch-and-bound over :func:`scipy.optimize.linprog` relaxations, kept as an
independent second route for differential testing.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

INT_TOL = 1e-6
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class MilpProblem:
    c: np.ndarray
    A: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray

    @property
    def num_vars(self) -> int:
        return len(self.c)

    def with_row(self, row: np.ndarray, lo: float, hi: float) -> "MilpProblem":
        return MilpProblem(
            self.c, np.vstack([self.A, row[None, :]]) if self.A.size else row[None, :].copy(),
            np.append(self.lo, lo), np.append(self.hi, hi), self.lb, self.ub, self.integrality,
        )

    def with_objective(self, c: np.ndarray) -> "MilpProblem":
        return MilpProblem(c, self.A, self.lo, self.hi, self.lb, self.ub, self.integrality)

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "MilpProblem":
        return MilpProblem(self.c, self.A, self.lo, self.hi, lb, ub, self.integrality)


@dataclass
class MilpResult:
    status: str  # optimal | infeasible | time_limit | unbounded | error
    x: np.ndarray | None = None
    fun: float | None = None
    gap: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)


def _round_integers(x: np.ndarray, integrality: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x[integrality] = np.round(x[integrality])
    return x


def solve_highs(problem: MilpProblem, time_limit: float) -> MilpResult:
    constraints = None
    if problem.A.size:
        constraints = LinearConstraint(problem.A, problem.lo, problem.hi)

    def run(presolve: bool):
        return milp(
            problem.c,
            constraints=constraints,
            bounds=Bounds(problem.lb, problem.ub),
            integrality=problem.integrality.astype(int),
            options={"time_limit": time_limit, "mip_rel_gap": 0.0, "presolve": presolve},
        )

    res = run(True)
    if res.status == 2:
        # presolve occasionally misreports near-degenerate problems as infeasible
        res = run(False)
    if res.status == 0:
        x = _round_integers(res.x, problem.integrality)
        return MilpResult("optimal", x, float(problem.c @ x), 0.0, res.message)
    if res.status == 1:
        if res.x is None:
            return MilpResult("time_limit", None, None, math.inf, res.message)
        x = _round_integers(res.x, problem.integrality)
        gap = getattr(res, "mip_gap", None)
        return MilpResult("time_limit", x, float(problem.c @ x), math.inf if gap is None else float(gap), res.message)
    if res.status == 2:
        return MilpResult("infeasible", message=res.message)
    if res.status == 3:
        return MilpResult("unbounded", message=res.message)
    return MilpResult("error", message=res.message)


def solve_lp(problem: MilpProblem, lb: np.ndarray | None = None, ub: np.ndarray | None = None):
    """LP relaxation; returns the scipy result."""
    A, lo, hi = problem.A, problem.lo, problem.hi
    eq = np.isfinite(lo) & np.isfinite(hi) & (lo == hi)
    up = np.isfinite(hi) & ~eq
    down = np.isfinite(lo) & ~eq
    A_ub = np.vstack([A[up], -A[down]]) if A.size else None
    b_ub = np.concatenate([hi[up], -lo[down]]) if A.size else None
    A_eq = A[eq] if A.size and eq.any() else None
    b_eq = lo[eq] if A.size and eq.any() else None
    if A_ub is not None and not len(A_ub):
        A_ub = b_ub = None
    lb = problem.lb if lb is None else lb
    ub = problem.ub if ub is None else ub
    bounds = list(zip(lb, [None if math.isinf(u) else u for u in ub]))
    return linprog(problem.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                   method="highs", options=_LP_OPTIONS)


def solve_bnb(problem: MilpProblem, time_limit: float) -> MilpResult:
    """Best-first branch-and-bound, branching on the most fractional integer variable."""
    start = time.monotonic()
    ints = np.flatnonzero(problem.integrality)
    incumbent: np.ndarray | None = None
    best = math.inf
    counter = 0
    heap = [(-math.inf, counter, problem.lb.astype(float), problem.ub.astype(float))]
    nodes = 0
    while heap:
        bound, _, lb, ub = heapq.heappop(heap)
        if bound >= best - 1e-9 * max(1.0, abs(best)):
            continue
        if time.monotonic() - start > time_limit:
            heapq.heappush(heap, (bound, counter, lb, ub))
            lower = min(h[0] for h in heap)
            if incumbent is None:
                return MilpResult("time_limit", None, None, math.inf, "time limit, no incumbent")
            gap = (best - lower) / max(1.0, abs(best)) if math.isfinite(lower) else math.inf
            return MilpResult("time_limit", incumbent, best, gap, "time limit")
        nodes += 1
        res = solve_lp(problem, lb, ub)
        if res.status == 2:
            continue
        if res.status == 3:
            return MilpResult("unbounded", message="LP relaxation unbounded")
        if res.status != 0:
            return MilpResult("error", message=res.message)
        if res.fun >= best - 1e-9 * max(1.0, abs(best)):
            continue
        x = res.x
        frac = np.abs(x[ints] - np.round(x[ints]))
        if not len(ints) or frac.max() <= INT_TOL:
            candidate = _round_integers(x, problem.integrality)
            value = float(problem.c @ candidate)
            if value < best:
                best, incumbent = value, candidate
            continue
        j = ints[int(np.argmax(frac))]
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        for child_lb, child_ub in ((lb, down_ub), (up_lb, ub)):
            if child_lb[j] <= child_ub[j]:
                counter += 1
                heapq.heappush(heap, (res.fun, counter, child_lb, child_ub))
    if incumbent is None:
        return MilpResult("infeasible", message="no integer-feasible point", extra={"nodes": nodes})
    return MilpResult("optimal", incumbent, best, 0.0, "optimal", {"nodes": nodes})


BACKENDS = {"highs": solve_highs, "bnb": solve_bnb}


def solve_milp(problem: MilpProblem, backend: str = "highs", time_limit: float = 300.0) -> MilpResult:
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown MILP backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    if problem.num_vars == 0:
        # every row is 0 <= ... so only the bounds decide
        ok = bool(np.all(problem.lo <= 0) and np.all(problem.hi >= 0))
        return MilpResult("optimal", np.zeros(0), 0.0) if ok else MilpResult("infeasible", message="empty problem")
    return fn(problem, time_limit)
