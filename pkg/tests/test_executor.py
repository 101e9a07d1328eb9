from fractions import Fraction

from hypothesis import given, settings, strategies as st

from toolbudget.core import BudgetLedger, Query
from toolbudget.executor import (
    NO_TOOLS_ANSWER,
    STOP,
    check_blacklist_judgment,
    forbidden_message,
    run_episode,
)
from toolbudget.experience import HeuristicScorer
from toolbudget.planner import Plan, PlanItem, empty_plan

from conftest import AlwaysPick, ScriptedPolicy, scripted_env, tool

CATALOG = [tool("A", 3), tool("B", 2), tool("C", 4)]


def plan_of(freqs, capacity=20):
    items = tuple(PlanItem(t.id, int(t.cost.total()), 1.0, freqs.get(t.id, 0)) for t in CATALOG)
    cost = sum(f * int(t.cost.total()) for t in CATALOG for tid, f in freqs.items() if tid == t.id)
    full = {t.id: freqs.get(t.id, 0) for t in CATALOG}
    return Plan(full, Fraction(sum(full.values())), cost, capacity, items)


def env_ok():
    return scripted_env({"A": ["a data"], "B": ["b data"], "C": ["c data"]}, {"q1": {"A": 1}})


def run(q, plan, policy, env=None, ledger=None, **kw):
    return run_episode(q, plan, CATALOG, policy, env or env_ok(), HeuristicScorer(),
                       ledger or BudgetLedger(22, 2), **kw)


def test_empty_plan_makes_no_calls(q):
    policy = ScriptedPolicy(["A"])
    t = run(q, empty_plan([c.id for c in CATALOG]), policy)
    assert t.steps == ()
    assert t.total_cost == 2
    assert t.final_answer == NO_TOOLS_ANSWER
    assert not t.resolved
    assert t.stop_reason == "no_tools"
    assert policy.seen == []


def test_exhausted_tool_is_intercepted(q):
    # B keeps the episode alive so the second pick of A reaches the interceptor
    t = run(q, plan_of({"A": 1, "B": 1}), AlwaysPick("A"))
    assert [s.intercepted for s in t.steps] == [False, True]
    assert t.steps[1].reason == "exhausted"
    assert t.steps[1].result == forbidden_message("A", "exhausted")
    assert t.invocation_count == 1
    assert t.total_cost == 2 + 3
    assert t.resolved


def test_exhausted_plan_stops_when_nothing_is_left(q):
    t = run(q, plan_of({"A": 1}), AlwaysPick("A", stop_on_error=False))
    # after A runs out, no tools remain and the loop ends without asking the policy
    assert len(t.steps) == 1
    assert t.stop_reason == "no_tools"


def test_blacklist_overrides_remaining_frequency(q):
    env = scripted_env({"A": ["error: invalid API key", "a data"], "B": ["b data"], "C": ["c"]})
    policy = ScriptedPolicy(["A", "A", "B"])
    t = run(q, plan_of({"A": 2, "B": 1}), policy, env=env)
    assert t.steps[0].blacklisted and t.steps[0].score == 0
    assert t.steps[1].intercepted and t.steps[1].reason == "blacklisted"
    assert not t.steps[2].intercepted and t.steps[2].tool_id == "B"
    # step 2 saw only B on offer and A listed as blacklisted
    available, forbidden, _ = policy.seen[1]
    assert available == ["B"]
    assert forbidden["A"] == "blacklisted"
    assert t.invocation_count == 2
    assert t.total_cost == 2 + 3 + 2


def test_helpful_then_unhelpful_blacklists_after_second(q):
    env = scripted_env({"A": ["a data", "error: resource not found"], "B": ["b"], "C": ["c"]})
    t = run(q, plan_of({"A": 3, "B": 1}), ScriptedPolicy(["A", "A", "A"]), env=env)
    assert [s.blacklisted for s in t.steps] == [False, True, False]
    assert t.steps[2].intercepted
    assert t.invocation_count == 2


def test_check_blacklist_judgment():
    s = HeuristicScorer()
    assert not check_blacklist_judgment("sunny, 21C", s)
    assert check_blacklist_judgment("error: upstream service timed out", s)


def test_scorer_cost_is_folded_into_tool_cost(q):
    t = run_episode(q, plan_of({"A": 1}), CATALOG, ScriptedPolicy(["A"]), env_ok(),
                    HeuristicScorer(cost=Fraction(1, 2)), BudgetLedger(22, 2))
    assert t.steps[0].cost == Fraction(7, 2)


def test_step_cap_counts_interceptions(q):
    t = run(q, plan_of({"A": 1, "B": 1}), AlwaysPick("A", stop_on_error=False), max_steps=6)
    assert len(t.steps) == 6
    assert t.stop_reason == "step_cap"
    assert t.invocation_count == 1
    assert t.interceptions == 5


def test_unplanned_has_no_limits(q):
    t = run(q, None, ScriptedPolicy(["A"] * 10))
    assert t.invocation_count == 10
    assert t.total_cost == 32
    assert not t.within_budget
    assert t.plan is None


def test_transcript_is_byte_identical(q):
    a = run(q, plan_of({"A": 2, "B": 1}), ScriptedPolicy(["A", "B", "A", "C"]))
    b = run(q, plan_of({"A": 2, "B": 1}), ScriptedPolicy(["A", "B", "A", "C"]))
    assert a.to_json() == b.to_json()


choices = st.lists(st.sampled_from(["A", "B", "C", STOP]), max_size=30)
results = st.lists(st.sampled_from(["data", "error: invalid API key"]), min_size=1, max_size=4)


@settings(max_examples=200, deadline=None)
@given(choices, st.fixed_dictionaries({t: st.integers(0, 3) for t in "ABC"}), results, results, results)
def test_execution_invariants(picks, freqs, ra, rb, rc):
    cost = sum(freqs[t] * c for t, c in zip("ABC", (3, 2, 4)))
    plan = plan_of(freqs, capacity=max(cost, 1))
    ledger = BudgetLedger(cost + 2, 2)
    env = scripted_env({"A": ra, "B": rb, "C": rc})
    t = run(Query("q1", "x"), plan, ScriptedPolicy(picks), env=env, ledger=ledger)
    used = {}
    banned_at = {}
    for s in t.steps:
        if s.intercepted:
            assert s.cost == 0
            continue
        assert s.tool_id not in banned_at
        used[s.tool_id] = used.get(s.tool_id, 0) + 1
        if s.blacklisted:
            banned_at[s.tool_id] = s.index
    for tid, n in used.items():
        assert n <= freqs[tid]
    assert t.invocation_count == sum(used.values())
    assert t.total_cost == 2 + sum((s.cost for s in t.steps), Fraction(0))
    assert t.total_cost <= 2 + cost
    assert t.within_budget
