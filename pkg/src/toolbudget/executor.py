"""Runs one tool-use episode under a plan.

The loop offers the policy the tools that still have planned invocations
left and are not blacklisted. Choosing anything else is intercepted: the tool
is not invoked, nothing is debited, and the policy receives an error message.
After each real invocation the result is judged; an unhelpful result puts the
tool on the episode's blacklist. A hard step cap (counting interceptions)
guarantees termination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Protocol, Sequence, Union

from .core import BudgetLedger, ConfigError, Number, Query, ToolSpec, as_fraction, fraction_to_str
from .experience import UsefulnessScorer
from .planner import Plan

DEFAULT_MAX_STEPS = 20
NO_TOOLS_ANSWER = "no tools available: unable to resolve the query"
FORBIDDEN_TEMPLATE = "error: tool '{tool}' is forbidden ({reason}); choose another tool or finish"

EXHAUSTED = "exhausted"
BLACKLISTED = "blacklisted"
UNAVAILABLE = "unavailable"


class _Stop:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "STOP"


STOP = _Stop()


@dataclass(frozen=True)
class ToolCall:
    tool_id: str
    params: str = ""


@dataclass(frozen=True)
class Observation:
    tool_id: str
    params: str
    result: str
    intercepted: bool = False


class AgentPolicy(Protocol):
    def use_tool(self, query: Query, available: Sequence[ToolSpec], forbidden: Mapping[str, str],
                 observations: Sequence[Observation]) -> Union[ToolCall, _Stop]: ...

    def summarize(self, query: Query, observations: Sequence[Observation]) -> str: ...


class EpisodeSession(Protocol):
    def invoke(self, tool_id: str, params: str) -> str: ...


class ToolEnvironment(Protocol):
    def start(self, query: Query) -> EpisodeSession: ...

    def is_resolved(self, query: Query, observations: Sequence[Observation]) -> bool: ...


@dataclass(frozen=True)
class StepRecord:
    index: int
    tool_id: str
    params: str
    result: str
    intercepted: bool = False
    reason: Optional[str] = None
    cost: Fraction = Fraction(0)
    score: Optional[int] = None
    blacklisted: bool = False

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "tool_id": self.tool_id,
            "params": self.params,
            "result": self.result,
            "intercepted": self.intercepted,
            "reason": self.reason,
            "cost": fraction_to_str(self.cost),
            "score": self.score,
            "blacklisted": self.blacklisted,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StepRecord:
        return cls(
            index=int(d["index"]), tool_id=d["tool_id"], params=d["params"], result=d["result"],
            intercepted=bool(d["intercepted"]), reason=d.get("reason"), cost=as_fraction(d["cost"]),
            score=d.get("score"), blacklisted=bool(d.get("blacklisted", False)),
        )


@dataclass(frozen=True)
class EpisodeTranscript:
    query_id: str
    steps: tuple[StepRecord, ...]
    final_answer: str
    resolved: bool
    total_cost: Fraction
    within_budget: bool
    invocation_count: int
    budget: Fraction
    overhead: Fraction
    stop_reason: str
    planned: bool
    plan: Optional[dict] = None
    planned_cost: Optional[Fraction] = None
    planned_value: Optional[float] = None
    policy: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        debits = sum((s.cost for s in self.steps), Fraction(0))
        assert self.total_cost == self.overhead + debits
        assert self.within_budget == (self.total_cost <= self.budget)
        assert self.invocation_count == sum(1 for s in self.steps if not s.intercepted)

    @property
    def interceptions(self) -> int:
        return sum(1 for s in self.steps if s.intercepted)

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "policy": self.policy,
            "planned": self.planned,
            "budget": fraction_to_str(self.budget),
            "overhead": fraction_to_str(self.overhead),
            "total_cost": fraction_to_str(self.total_cost),
            "within_budget": self.within_budget,
            "resolved": self.resolved,
            "invocation_count": self.invocation_count,
            "stop_reason": self.stop_reason,
            "final_answer": self.final_answer,
            "planned_cost": None if self.planned_cost is None else fraction_to_str(self.planned_cost),
            "planned_value": self.planned_value,
            "plan": self.plan,
            "steps": [s.to_dict() for s in self.steps],
            **({"extra": self.extra} if self.extra else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> EpisodeTranscript:
        pc = d.get("planned_cost")
        return cls(
            query_id=d["query_id"],
            steps=tuple(StepRecord.from_dict(s) for s in d["steps"]),
            final_answer=d["final_answer"],
            resolved=bool(d["resolved"]),
            total_cost=as_fraction(d["total_cost"]),
            within_budget=bool(d["within_budget"]),
            invocation_count=int(d["invocation_count"]),
            budget=as_fraction(d["budget"]),
            overhead=as_fraction(d["overhead"]),
            stop_reason=d["stop_reason"],
            planned=bool(d["planned"]),
            plan=d.get("plan"),
            planned_cost=None if pc is None else as_fraction(pc),
            planned_value=d.get("planned_value"),
            policy=d.get("policy", ""),
            extra=d.get("extra", {}),
        )


def check_blacklist_judgment(result: str, scorer: UsefulnessScorer, *, query: Optional[Query] = None,
                             tool_id: Optional[str] = None) -> bool:
    """True when the result is judged unhelpful, i.e. the tool must be blacklisted."""
    return scorer.score(result, query=query, tool_id=tool_id) == 0


def forbidden_message(tool_id: str, reason: str) -> str:
    return FORBIDDEN_TEMPLATE.format(tool=tool_id, reason=reason)


def run_episode(query: Query, plan: Optional[Plan], catalog: Sequence[ToolSpec], policy: AgentPolicy,
                env: ToolEnvironment, scorer: UsefulnessScorer, ledger: BudgetLedger, *,
                max_steps: int = DEFAULT_MAX_STEPS, use_blacklist: Optional[bool] = None,
                interception_penalty: Number = 0, policy_name: str = "") -> EpisodeTranscript:
    """Execute one episode and return its transcript.

    ``plan=None`` runs the unplanned baseline: every candidate tool may be used
    any number of times and, unless ``use_blacklist`` says otherwise, no
    blacklist is kept. The scorer's ``cost`` is added to each invocation it
    judges. ``interception_penalty`` defaults to 0; a nonzero value voids the
    guarantee that planned episodes stay within budget.
    """
    if ledger.consumed != 0:
        raise ConfigError("run_episode needs a fresh ledger")
    if max_steps < 1:
        raise ConfigError("max_steps must be >= 1")
    planned = plan is not None
    blacklisting = planned if use_blacklist is None else use_blacklist
    penalty = as_fraction(interception_penalty)
    judge_cost = as_fraction(getattr(scorer, "cost", 0) or 0) if blacklisting else Fraction(0)
    by_id = {t.id: t for t in catalog}

    # counts stay in `left` after a tool leaves `live` so usage can be audited
    left: dict[str, Optional[int]] = {}
    for t in catalog:
        if planned:
            left[t.id] = plan.frequencies.get(t.id, 0)
        else:
            left[t.id] = None
    initial = dict(left)
    live = {t for t, f in left.items() if f is None or f > 0}
    removed = {t.id: EXHAUSTED for t in catalog if t.id not in live}
    blacklist: set[str] = set()

    session = env.start(query)
    observations: list[Observation] = []
    steps: list[StepRecord] = []
    stop_reason = "step_cap"
    for index in range(max_steps):
        available = [by_id[t] for t in by_id if t in live]
        if not available:
            stop_reason = "no_tools"
            break
        forbidden = {**removed, **{t: BLACKLISTED for t in blacklist}}
        choice = policy.use_tool(query, available, dict(forbidden), tuple(observations))
        if choice is STOP:
            stop_reason = "policy_stop"
            break
        if not isinstance(choice, ToolCall):
            raise TypeError(f"policy returned {choice!r}; expected ToolCall or STOP")
        tid = choice.tool_id
        if tid not in live:
            reason = forbidden.get(tid, UNAVAILABLE)
            msg = forbidden_message(tid, reason)
            ledger = ledger.debit(penalty)
            steps.append(StepRecord(index, tid, choice.params, msg, intercepted=True, reason=reason, cost=penalty))
            observations.append(Observation(tid, choice.params, msg, intercepted=True))
            continue

        result = session.invoke(tid, choice.params)
        cost = by_id[tid].cost.total() + judge_cost
        ledger = ledger.debit(cost)
        if left[tid] is not None:
            left[tid] -= 1
            if left[tid] == 0:
                live.discard(tid)
                removed[tid] = EXHAUSTED
        score = None
        banned = False
        if blacklisting:
            score = scorer.score(result, query=query, tool_id=tid)
            if score == 0:
                banned = True
                blacklist.add(tid)
                live.discard(tid)
                removed.pop(tid, None)
        steps.append(StepRecord(index, tid, choice.params, result, cost=cost, score=score, blacklisted=banned))
        observations.append(Observation(tid, choice.params, result))

    real = [o for o in observations if not o.intercepted]
    if real:
        answer = policy.summarize(query, tuple(observations))
        resolved = bool(env.is_resolved(query, tuple(observations)))
    else:
        answer = NO_TOOLS_ANSWER
        resolved = False

    invocations = sum(1 for s in steps if not s.intercepted)
    if planned:
        assert invocations == sum(initial[t] - left[t] for t in initial)
    return EpisodeTranscript(
        query_id=query.id,
        steps=tuple(steps),
        final_answer=answer,
        resolved=resolved,
        total_cost=ledger.total_cost(),
        within_budget=ledger.within_budget(),
        invocation_count=invocations,
        budget=ledger.budget,
        overhead=ledger.overhead,
        stop_reason=stop_reason,
        planned=planned,
        plan=plan.to_dict() if planned else None,
        planned_cost=plan.planned_cost_real() if planned else None,
        planned_value=float(plan.total_value) if planned else None,
        policy=policy_name,
    )
