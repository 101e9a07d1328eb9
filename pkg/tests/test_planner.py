import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import enumerate_best, scaled_costs
from toolbudget import _kernels
from toolbudget.core import BudgetExhaustedError, BudgetLedger, ConfigError
from toolbudget.estimator import ToolEstimate
from toolbudget.planner import (
    Plan,
    PlanItem,
    PlanProblem,
    QuantizationConfig,
    make_plan,
    plan_table,
    quantize,
    solve,
)

from conftest import tool

EXAMPLE = [("A", 3, 0.9, 2), ("B", 5, 0.8, 1), ("C", 2, 0.3, 3)]


def problem(cap, rows):
    return PlanProblem(cap, tuple(PlanItem(*r) for r in rows))


def test_zero_capacity(backend):
    plan = solve(problem(0, EXAMPLE))
    assert plan.frequencies == {"A": 0, "B": 0, "C": 0}
    assert plan.total_value == 0


def test_single_item_saturation(backend):
    plan = solve(problem(20, [("T", 5, 1.0, 2)]))
    assert plan.frequencies == {"T": 2}
    assert plan.total_value == 2
    assert plan.planned_cost == 10


def test_three_tool_example(backend):
    plan = solve(problem(10, EXAMPLE))
    assert plan.backend == backend
    assert plan.frequencies == {"A": 2, "B": 0, "C": 2}
    assert float(plan.total_value) == pytest.approx(2.4)
    assert plan.planned_cost == 10
    value, cost, tied = enumerate_best(10, EXAMPLE)
    assert plan.total_value == value and plan.planned_cost == cost
    assert plan.frequencies in tied


def test_zero_value_tool_not_planned(backend):
    plan = solve(problem(10, [("A", 1, 0.0, 5), ("B", 2, 0.5, 1)]))
    assert plan.frequencies == {"A": 0, "B": 1}


def test_cost_tie_break(backend):
    # equal value, the cheaper plan wins
    plan = solve(problem(5, [("A", 4, 0.5, 1), ("B", 2, 0.5, 1)]))
    assert plan.frequencies == {"A": 0, "B": 1}
    # equal value and cost, fewer invocations wins
    plan = solve(problem(5, [("A", 2, 0.25, 2), ("B", 4, 0.5, 1)]))
    assert plan.frequencies == {"A": 0, "B": 1}


def test_backends_agree_on_random_instances():
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        costs = rng.integers(1, 10, n)
        maxf = rng.integers(0, 5, n)
        for values in (rng.integers(0, 100, n), rng.random(n)):
            a = _kernels.bounded_knapsack_numba(costs, values, maxf, 30)
            b = _kernels.bounded_knapsack_numpy(costs, values, maxf, 30)
            assert np.array_equal(a[0], b[0])
            assert a[1:] == pytest.approx(b[1:])


items_st = st.lists(
    st.tuples(st.integers(1, 10), st.fractions(0, 1, max_denominator=20), st.integers(0, 4)),
    min_size=1, max_size=4,
)


def as_rows(raw):
    return [(f"t{i}", c, float(v), f) for i, (c, v, f) in enumerate(raw)]


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 25), items_st)
def test_optimal_against_enumeration(cap, raw):
    rows = as_rows(raw)
    plan = solve(problem(cap, rows))
    value, cost, tied = enumerate_best(cap, rows)
    assert plan.total_value == value
    assert plan.planned_cost == cost
    assert plan.frequencies in tied
    assert plan.planned_cost <= cap
    for tid, _, _, f in rows:
        assert 0 <= plan.frequencies[tid] <= f


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 24), items_st)
def test_budget_monotonicity(cap, raw):
    rows = as_rows(raw)
    assert solve(problem(cap, rows)).total_value <= solve(problem(cap + 1, rows)).total_value


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 25), items_st, st.fractions(0, 1, max_denominator=10), st.fractions(0, 1, max_denominator=10))
def test_threshold_monotonicity(cap, raw, t1, t2):
    lo, hi = sorted((t1, t2))
    rows = as_rows(raw)

    def at(tau):
        return solve(problem(cap, [(t, c, v, f if Fraction(v) >= tau else 0) for t, c, v, f in rows]))

    assert at(hi).total_value <= at(lo).total_value


def test_threshold_can_raise_cost_of_single_plan(backend):
    # three cheap low-value calls beat one expensive call; once the cheap tool
    # drops below the threshold the expensive call is the best left
    rows = [("A", 1, 0.2, 3), ("B", 5, 0.5, 1)]
    before = solve(problem(5, rows))
    after = solve(problem(5, [("A", 1, 0.2, 0), ("B", 5, 0.5, 1)]))
    assert after.total_value < before.total_value
    assert after.planned_cost > before.planned_cost


def test_quantize_integer_example():
    costs, cap, lam = quantize([3], 20, QuantizationConfig(Fraction(1, 2), 4))
    assert (costs, cap, lam) == ([30], 200, 10)


def test_quantize_real_example():
    costs, _, lam = quantize(["0.35"], 20, QuantizationConfig(0.5, 4))
    assert costs == [4]
    assert Fraction(costs[0]) / lam == Fraction(2, 5)


def test_quantize_float_epsilon_reads_as_decimal():
    assert QuantizationConfig(0.1, 20).scale == 210


def test_quantize_rejects_bad_inputs():
    cfg = QuantizationConfig()
    with pytest.raises(ConfigError):
        quantize([0], 10, cfg)
    with pytest.raises(ConfigError):
        quantize([1], 0, cfg)
    with pytest.raises(ConfigError):
        quantize([1], 10, QuantizationConfig(Fraction(1, 10**20), 20))
    with pytest.raises(ConfigError):
        QuantizationConfig(0)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([Fraction(1, 10), Fraction(1, 2)]), st.integers(1, 20),
       st.lists(st.fractions(Fraction(1, 100), 10, max_denominator=997), min_size=1, max_size=20),
       st.fractions(1, 60, max_denominator=991))
def test_quantize_matches_direct_formula_and_bound(eps, n, costs, budget):
    traj = costs[:n]
    cfg = QuantizationConfig(eps, n)
    q, cap, lam = quantize(traj, budget, cfg)
    assert (q, cap, lam) == scaled_costs(traj, budget, eps, n)
    real_gap = budget - sum(traj)
    approx_gap = Fraction(cap) / lam - sum(Fraction(c) / lam for c in q)
    assert approx_gap <= real_gap
    assert abs(approx_gap - real_gap) < eps


def test_plan_dict_roundtrip(tmp_path, q):
    tools = [tool("A", "1.5"), tool("B", 2)]
    est = [ToolEstimate("A", 0.7, 2.0), ToolEstimate("B", 0.4, 1.0)]
    plan = make_plan(q, tools, est, BudgetLedger(6, 1))
    assert plan.scale == Fraction(42)
    path = tmp_path / "plan.json"
    plan.save(path)
    back = Plan.load(path)
    assert back.frequencies == plan.frequencies
    assert back.total_value == plan.total_value
    assert back.planned_cost_real() == plan.planned_cost_real() <= 5
    assert "V=" in plan_table(plan, est)


def test_make_plan_default_budget(q):
    tools = [tool(t, c) for t, c in zip("ABC", (4, 6, 3))]
    est = [ToolEstimate(t, 0.9, 3.0) for t in "ABC"]
    plan = make_plan(q, tools, est, BudgetLedger(22, 2))
    assert plan.capacity == 20
    assert plan.scale == 1
    assert plan.planned_cost <= 20


def test_make_plan_random_costs_within_budget(q):
    rng = random.Random(0)
    for _ in range(200):
        tools = [tool(f"t{i}", rng.randint(1, 10)) for i in range(5)]
        est = [ToolEstimate(t.id, rng.random(), rng.uniform(0, 4)) for t in tools]
        plan = make_plan(q, tools, est, BudgetLedger(20))
        assert plan.planned_cost_real() <= 20
        for e in est:
            assert plan.frequencies[e.tool_id] <= math.floor(e.freq_constraint)


def test_make_plan_below_tau_is_empty(q):
    tools = [tool("A", 1), tool("B", 2)]
    plan = make_plan(q, tools, [ToolEstimate("A", 0.1, 0.0), ToolEstimate("B", 0.05, 0.0)], BudgetLedger(10))
    assert plan.active() == {}


def test_make_plan_budget_exhausted(q):
    with pytest.raises(BudgetExhaustedError):
        make_plan(q, [tool("A", 1)], [ToolEstimate("A", 1.0, 1.0)], BudgetLedger(5, 5))
    with pytest.raises(BudgetExhaustedError):
        make_plan(q, [tool("A", 1)], [ToolEstimate("A", 1.0, 1.0)], BudgetLedger(5, 3), planning_overhead=2)


def test_large_instance_is_fast(backend):
    rng = np.random.default_rng(1)
    items = tuple(PlanItem(f"t{i:02d}", int(rng.integers(1, 500)), float(rng.random()), 10) for i in range(50))
    solve(PlanProblem(100, items))  # compile outside the timing
    start = time.perf_counter()
    plan = solve(PlanProblem(10_000, items))
    assert time.perf_counter() - start < 1.0
    assert plan.planned_cost <= 10_000


def test_full_tie_keeps_earlier_tool_id(backend):
    plan = solve(problem(3, [("B", 2, 0.5, 1), ("A", 2, 0.5, 1)]))
    assert plan.frequencies == {"A": 1, "B": 0}
