"""Tool-usage planning as a bounded knapsack over integer costs.

Real-valued costs are first scaled to integers: with ``lam = (N + 1) / eps``
each cost becomes ``ceil(lam * c)`` and the capacity ``floor(lam * R)``. Costs
only round up and the capacity only rounds down, so any plan that fits the
scaled problem fits the real one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .core import (
    BudgetExhaustedError,
    BudgetLedger,
    ConfigError,
    Number,
    Query,
    ToolSpec,
    as_fraction,
    fraction_to_str,
)
from .estimator import ToolEstimate

INT64_LIMIT = 2**62
MAX_TABLE_CELLS = 2**28


@dataclass(frozen=True)
class PlanItem:
    tool_id: str
    cost: int
    value: float
    max_freq: int

    def __post_init__(self) -> None:
        if int(self.cost) != self.cost or self.cost < 1:
            raise ConfigError(f"item {self.tool_id!r}: cost must be a positive integer, got {self.cost!r}")
        if int(self.max_freq) != self.max_freq or self.max_freq < 0:
            raise ConfigError(f"item {self.tool_id!r}: max_freq must be a nonnegative integer")
        if not 0 <= self.value <= 1:
            raise ConfigError(f"item {self.tool_id!r}: value must lie in [0, 1], got {self.value!r}")


@dataclass(frozen=True)
class PlanProblem:
    remaining_budget: int
    items: tuple[PlanItem, ...]

    def __post_init__(self) -> None:
        if int(self.remaining_budget) != self.remaining_budget or self.remaining_budget < 0:
            raise ConfigError(f"remaining_budget must be a nonnegative integer, got {self.remaining_budget!r}")
        object.__setattr__(self, "items", tuple(self.items))
        ids = [it.tool_id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate tool ids in plan problem")


@dataclass(frozen=True)
class QuantizationConfig:
    epsilon: Fraction = Fraction(1, 2)
    max_steps: int = 20

    def __post_init__(self) -> None:
        eps = self.epsilon
        # go through str for floats so 0.1 means 1/10
        eps = Fraction(str(eps)) if isinstance(eps, float) else as_fraction(eps)
        if eps <= 0:
            raise ConfigError(f"epsilon must be positive, got {eps}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ConfigError(f"max_steps must be a positive integer, got {self.max_steps!r}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def scale(self) -> Fraction:
        return Fraction(self.max_steps + 1) / self.epsilon


def quantize(costs: Sequence[Number], budget_r: Number, cfg: QuantizationConfig) -> tuple[list[int], int, Fraction]:
    """Scale real costs and capacity to integers: ``(ceil(lam*c), floor(lam*R), lam)``."""
    lam = cfg.scale
    out = []
    for c in costs:
        c = as_fraction(c)
        if c <= 0:
            raise ConfigError(f"costs must be positive, got {c}")
        q = math.ceil(lam * c)
        if q >= INT64_LIMIT:
            raise ConfigError(f"scaled cost {q} overflows the integer range; raise epsilon")
        out.append(q)
    r = as_fraction(budget_r)
    if r <= 0:
        raise ConfigError(f"budget must be positive, got {r}")
    rq = math.floor(lam * r)
    if rq >= INT64_LIMIT:
        raise ConfigError(f"scaled budget {rq} overflows the integer range; raise epsilon")
    return out, rq, lam


@dataclass(frozen=True)
class Plan:
    """Allowed invocation count per tool.

    ``planned_cost`` and ``capacity`` are in scaled integer units (``scale``
    cost units per unit); ``total_value`` is exact.
    """

    frequencies: dict[str, int]
    total_value: Fraction
    planned_cost: int
    capacity: int
    items: tuple[PlanItem, ...] = ()
    query_id: Optional[str] = None
    scale: Fraction = Fraction(1)
    quantization: Optional[QuantizationConfig] = None
    real_costs: dict[str, Fraction] = field(default_factory=dict)
    backend: str = ""

    def __post_init__(self) -> None:
        by_id = {it.tool_id: it for it in self.items}
        if by_id:
            value = sum((f * Fraction(by_id[t].value) for t, f in self.frequencies.items()), Fraction(0))
            cost = sum(f * by_id[t].cost for t, f in self.frequencies.items())
            assert value == self.total_value, (value, self.total_value)
            assert cost == self.planned_cost, (cost, self.planned_cost)
            for t, f in self.frequencies.items():
                assert 0 <= f <= by_id[t].max_freq, (t, f)
        assert self.planned_cost <= self.capacity, (self.planned_cost, self.capacity)

    @property
    def total_invocations(self) -> int:
        return sum(self.frequencies.values())

    def active(self) -> dict[str, int]:
        return {t: f for t, f in self.frequencies.items() if f > 0}

    def planned_cost_real(self) -> Fraction:
        """Planned cost in original units, from the unscaled tool costs when known."""
        if self.real_costs:
            return sum((f * self.real_costs[t] for t, f in self.frequencies.items()), Fraction(0))
        return Fraction(self.planned_cost) / self.scale

    def to_dict(self) -> dict:
        d = {
            "query_id": self.query_id,
            "frequencies": dict(self.frequencies),
            "total_value": float(self.total_value),
            "planned_cost": self.planned_cost,
            "capacity": self.capacity,
            "planned_cost_real": fraction_to_str(self.planned_cost_real()),
            "quantization": {
                "epsilon": fraction_to_str(self.quantization.epsilon) if self.quantization else None,
                "max_steps": self.quantization.max_steps if self.quantization else None,
                "lambda": fraction_to_str(self.scale),
            },
            "items": [
                {"tool_id": it.tool_id, "cost": it.cost, "value": it.value, "max_freq": it.max_freq}
                for it in self.items
            ],
        }
        if self.real_costs:
            d["real_costs"] = {t: fraction_to_str(c) for t, c in self.real_costs.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Plan:
        items = tuple(PlanItem(**it) for it in d.get("items", ()))
        freqs = {str(k): int(v) for k, v in d["frequencies"].items()}
        q = d.get("quantization") or {}
        qcfg = None
        if q.get("epsilon") is not None:
            qcfg = QuantizationConfig(as_fraction(q["epsilon"]), int(q["max_steps"]))
        by_id = {it.tool_id: it for it in items}
        if by_id:
            total = sum((f * Fraction(by_id[t].value) for t, f in freqs.items()), Fraction(0))
            if abs(float(total) - float(d["total_value"])) > 1e-9:
                raise ConfigError("plan file total_value does not match its items")
        else:
            total = Fraction(d["total_value"])
        return cls(
            frequencies=freqs,
            total_value=total,
            planned_cost=int(d["planned_cost"]),
            capacity=int(d.get("capacity", d["planned_cost"])),
            items=items,
            query_id=d.get("query_id"),
            scale=as_fraction(q.get("lambda", 1)),
            quantization=qcfg,
            real_costs={t: as_fraction(c) for t, c in d.get("real_costs", {}).items()},
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> Plan:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def empty_plan(tool_ids: Sequence[str] = (), capacity: int = 0, **kw) -> Plan:
    return Plan({t: 0 for t in tool_ids}, Fraction(0), 0, capacity, **kw)


def _exact_value_units(items: Sequence[PlanItem]) -> Optional[np.ndarray]:
    """Values as int64 numerators over a common denominator, if they fit."""
    fracs = [Fraction(it.value) for it in items]
    denom = 1
    for f in fracs:
        denom = denom * f.denominator // math.gcd(denom, f.denominator)
    nums = [f.numerator * (denom // f.denominator) for f in fracs]
    if sum(n * it.max_freq for n, it in zip(nums, items)) >= INT64_LIMIT:
        return None
    return np.array(nums, dtype=np.int64)


def solve(problem: PlanProblem) -> Plan:
    """Optimal plan for a bounded knapsack problem.

    Maximises total value; ties go to lower cost, then fewer invocations, then
    to plans whose invocations sit on tools earlier in ``tool_id`` order.
    """
    items = sorted(problem.items, key=lambda it: it.tool_id)
    cap = int(problem.remaining_budget)
    # items that can never be used do not need a DP row
    live = [it for it in items if it.max_freq > 0 and it.cost <= cap and it.value > 0]
    freqs = {it.tool_id: 0 for it in problem.items}
    backend = _kernels.backend_name()
    if not live or cap == 0:
        return Plan(freqs, Fraction(0), 0, cap, tuple(problem.items), backend=backend)
    if len(live) * (cap + 1) > MAX_TABLE_CELLS:
        raise ConfigError(f"DP table too large ({len(live)} x {cap + 1}); use a coarser epsilon")

    costs = np.array([it.cost for it in live], dtype=np.int64)
    maxf = np.array([min(it.max_freq, cap // it.cost) for it in live], dtype=np.int64)
    values = _exact_value_units(live)
    if values is None:
        values = np.array([it.value for it in live], dtype=np.float64)
    choice, _, _, _ = _kernels.bounded_knapsack(costs, values, maxf, cap)

    j = cap
    for i in range(len(live) - 1, -1, -1):
        k = int(choice[i, j])
        freqs[live[i].tool_id] = k
        j -= k * live[i].cost
    by_id = {it.tool_id: it for it in problem.items}
    total = sum((f * Fraction(by_id[t].value) for t, f in freqs.items()), Fraction(0))
    cost = sum(f * by_id[t].cost for t, f in freqs.items())
    return Plan(freqs, total, cost, cap, tuple(problem.items), backend=backend)


def make_plan(query: Query, tools: Sequence[ToolSpec], estimates: Sequence[ToolEstimate], ledger: BudgetLedger,
              cfg: Optional[QuantizationConfig] = None, planning_overhead: Number = 0,
              extra_cost_per_call: Number = 0) -> Plan:
    """Estimate-to-plan pipeline for one query.

    ``planning_overhead`` is folded into the ledger overhead before computing
    the capacity. ``extra_cost_per_call`` (e.g. a scorer's cost) is added to
    every tool cost. Without ``cfg``, integral costs and capacity are used
    as-is; otherwise they are scaled with ``cfg`` (default eps=1/2, N=20).
    """
    est = {e.tool_id: e for e in estimates}
    missing = [t.id for t in tools if t.id not in est]
    if missing:
        raise ConfigError(f"no estimate for tools {missing}")
    ledger = ledger.with_overhead(planning_overhead)
    r = ledger.remaining()
    if r <= 0:
        raise BudgetExhaustedError(f"overhead {ledger.overhead} leaves no budget (B={ledger.budget})")
    extra = as_fraction(extra_cost_per_call)
    real = {t.id: t.cost.total() + extra for t in tools}
    integral = all(c.denominator == 1 for c in real.values()) and r.denominator == 1
    if cfg is None and integral:
        qcosts, cap, lam = [int(real[t.id]) for t in tools], int(r), Fraction(1)
        for t, c in zip(tools, qcosts):
            if c <= 0:
                raise ConfigError(f"tool {t.id!r} has nonpositive cost")
    else:
        cfg = cfg or QuantizationConfig()
        qcosts, cap, lam = quantize([real[t.id] for t in tools], r, cfg)
    items = [
        PlanItem(t.id, c, est[t.id].expected_value, int(math.floor(est[t.id].freq_constraint)))
        for t, c in zip(tools, qcosts)
    ]
    plan = solve(PlanProblem(cap, tuple(items)))
    return Plan(
        plan.frequencies, plan.total_value, plan.planned_cost, plan.capacity, plan.items,
        query_id=query.id, scale=lam, quantization=cfg, real_costs=real, backend=plan.backend,
    )


def plan_table(plan: Plan, estimates: Sequence[ToolEstimate]) -> str:
    """Fixed-width text table: tool, cost, value, frequency limit, planned count."""
    est = {e.tool_id: e for e in estimates}
    rows = [f"{'tool':<16}{'cost':>10}{'v':>9}{'F~':>8}{'f':>4}"]
    for it in plan.items:
        e = est.get(it.tool_id)
        real = plan.real_costs.get(it.tool_id)
        cost = fraction_to_str(real) if real is not None else str(it.cost)
        rows.append(
            f"{it.tool_id:<16}{cost:>10}{it.value:>9.4f}{(e.freq_constraint if e else it.max_freq):>8.3f}"
            f"{plan.frequencies.get(it.tool_id, 0):>4}"
        )
    rows.append(
        f"V={float(plan.total_value):.4f}  cost={fraction_to_str(plan.planned_cost_real())}"
        f" (scaled {plan.planned_cost}/{plan.capacity}, lambda={fraction_to_str(plan.scale)})"
    )
    return "\n".join(rows)
