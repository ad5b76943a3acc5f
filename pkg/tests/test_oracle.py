from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from flowplan.optimizer import instance_to_dict, solve, validate_plan
from flowplan.oracle import OracleBoundsError, brute_force_solve, exact_lp, random_instance

from conftest import make_model, small_instance


def test_exact_lp_textbook():
    # max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  36 at (2, 6)
    status, value, x = exact_lp([-3, -5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert status == "optimal" and value == -36 and x == [2, 6]


def test_exact_lp_equality_and_infeasible():
    status, value, x = exact_lp([1, 1], A_eq=[[1, 2]], b_eq=[Fraction(3, 7)])
    assert status == "optimal" and value == Fraction(3, 14)
    assert exact_lp([1], [[1]], [-1])[0] == "infeasible"
    assert exact_lp([-1], [[-1]], [0])[0] == "unbounded"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_lp_matches_float_simplex(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 4), rng.integers(1, 4)
    c = rng.integers(-5, 6, n)
    A = rng.integers(0, 6, (m, n))
    b = rng.integers(0, 10, m)
    status, value, _ = exact_lp(c.tolist(), A.tolist(), b.tolist())
    ref = linprog(c, A_ub=A, b_ub=b, method="highs")
    assert (status == "optimal") == (ref.status == 0)
    if status == "optimal":
        assert float(value) == pytest.approx(ref.fun, abs=1e-7)


def test_oracle_on_two_instance_example(n2_instance):
    plan = brute_force_solve(n2_instance)
    assert plan.instance_counts == {"M@A100x4": 2}
    assert plan.objective_value == pytest.approx(2 * 0.3 * 4)


def test_oracle_reports_empty_budget_infeasible():
    inst = small_instance(budgets={"A100": 0})
    assert brute_force_solve(inst).status == solve(inst).status == "infeasible"


def test_oracle_refuses_large_instances(n2_instance):
    models = [make_model(f"M{i}") for i in range(5)]
    with pytest.raises(OracleBoundsError):
        brute_force_solve(n2_instance.replace(models=models))


@pytest.mark.parametrize("objective", ["min_energy", "min_cost", "max_accuracy_under_budget"])
@pytest.mark.parametrize("mode", ["joint", "per_pair"])
def test_differential_against_solver(objective, mode):
    for seed in range(1000, 1030):
        inst = random_instance(seed, objective, mode)
        a, b = solve(inst), brute_force_solve(inst)
        assert a.status == b.status, seed
        if a.status == "optimal":
            assert a.objective_value == pytest.approx(b.objective_value, rel=1e-6, abs=1e-9), seed
            assert validate_plan(inst, b) == []


def test_random_instances_are_seeded():
    assert instance_to_dict(random_instance(5)) == instance_to_dict(random_instance(5))
    assert instance_to_dict(random_instance(5)) != instance_to_dict(random_instance(6))
