"""Tools, costs, queries and the budget ledger shared by every other module.

All cost arithmetic uses :class:`fractions.Fraction` so the budget inequality
``overhead + sum(debits) <= budget`` is checked exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Union

Number = Union[int, float, str, Fraction]


class ToolBudgetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ToolBudgetError, ValueError):
    """Invalid configuration or malformed input data."""


class BudgetExhaustedError(ToolBudgetError):
    """The overhead alone consumes the whole budget; no tool can be planned."""


def as_fraction(x: Number) -> Fraction:
    """Convert ints, decimal strings, floats (exactly) or Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ConfigError(f"expected a number, got {x!r}")
    if isinstance(x, (int, float, str)):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"not a number: {x!r}") from exc
    raise ConfigError(f"expected a number, got {type(x).__name__}")


def fraction_to_str(x: Fraction) -> str:
    """Render a Fraction as a decimal string when that is exact, else ``p/q``."""
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    scaled = abs(x) * 10**digits
    sign = "-" if x < 0 else ""
    whole, frac = divmod(int(scaled), 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}".rstrip("0").rstrip(".")


@dataclass(frozen=True)
class ToolCost:
    """Per-invocation cost of one tool, split into tool fee, LLM fee and time."""

    tool_component: Fraction = Fraction(0)
    llm_component: Fraction = Fraction(0)
    time_component: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        for name in ("tool_component", "llm_component", "time_component"):
            value = as_fraction(getattr(self, name))
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)

    def total(self) -> Fraction:
        return self.tool_component + self.llm_component + self.time_component

    @classmethod
    def flat(cls, amount: Number) -> ToolCost:
        """A cost carried entirely by the tool component."""
        return cls(tool_component=as_fraction(amount))

    def to_dict(self) -> dict:
        return {
            "tool": fraction_to_str(self.tool_component),
            "llm": fraction_to_str(self.llm_component),
            "time": fraction_to_str(self.time_component),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ToolCost:
        unknown = set(d) - {"tool", "llm", "time"}
        if unknown:
            raise ConfigError(f"unknown cost fields: {sorted(unknown)}")
        return cls(
            tool_component=as_fraction(d.get("tool", 0)),
            llm_component=as_fraction(d.get("llm", 0)),
            time_component=as_fraction(d.get("time", 0)),
        )


@dataclass(frozen=True)
class ToolSpec:
    id: str
    name: str
    documentation: str
    cost: ToolCost

    def __post_init__(self) -> None:
        if not self.id:
            raise ConfigError("tool id must be non-empty")
        if not self.documentation or not self.documentation.strip():
            raise ConfigError(f"tool {self.id!r} has empty documentation")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "documentation": self.documentation,
            "cost": self.cost.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ToolSpec:
        unknown = set(d) - {"id", "name", "documentation", "cost"}
        if unknown:
            raise ConfigError(f"unknown tool fields: {sorted(unknown)}")
        try:
            return cls(
                id=str(d["id"]),
                name=str(d.get("name", d["id"])),
                documentation=str(d["documentation"]),
                cost=ToolCost.from_dict(d["cost"]),
            )
        except KeyError as exc:
            raise ConfigError(f"tool record missing field {exc}") from exc


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ConfigError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class BudgetLedger:
    """Immutable record of a per-query budget and what has been spent against it.

    ``overhead`` is the fixed cost of prompts (and planning); ``consumed`` is the
    sum of every tool debit so far. Debits past the budget are recorded, not
    refused: the ledger tracks reality and enforcement lives elsewhere.
    """

    budget: Fraction
    overhead: Fraction = Fraction(0)
    consumed: Fraction = Fraction(0)
    debits: tuple[Fraction, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        budget = as_fraction(self.budget)
        overhead = as_fraction(self.overhead)
        consumed = as_fraction(self.consumed)
        if budget <= 0:
            raise ConfigError(f"budget must be positive, got {budget}")
        if overhead < 0 or consumed < 0:
            raise ConfigError("overhead and consumed must be >= 0")
        object.__setattr__(self, "budget", budget)
        object.__setattr__(self, "overhead", overhead)
        object.__setattr__(self, "consumed", consumed)

    @property
    def capacity(self) -> Fraction:
        """R = B - c_s, the amount available for tool calls."""
        return self.budget - self.overhead

    def remaining(self) -> Fraction:
        return self.budget - self.overhead - self.consumed

    def within_budget(self) -> bool:
        return self.overhead + self.consumed <= self.budget

    def total_cost(self) -> Fraction:
        return self.overhead + self.consumed

    def debit(self, cost: ToolCost | Number) -> BudgetLedger:
        amount = cost.total() if isinstance(cost, ToolCost) else as_fraction(cost)
        if amount < 0:
            raise ConfigError(f"cannot debit a negative amount ({amount})")
        return replace(self, consumed=self.consumed + amount, debits=self.debits + (amount,))

    def with_overhead(self, extra: Number) -> BudgetLedger:
        """Fold an additional fixed cost (e.g. planning) into the overhead."""
        return replace(self, overhead=self.overhead + as_fraction(extra))


def ledger_debit(ledger: BudgetLedger, cost: ToolCost | Number) -> BudgetLedger:
    return ledger.debit(cost)


def check_unique_ids(tools: Iterable[ToolSpec]) -> None:
    seen: set[str] = set()
    for t in tools:
        if t.id in seen:
            raise ConfigError(f"duplicate tool id {t.id!r}")
        seen.add(t.id)


def load_catalog(path: str | Path) -> list[ToolSpec]:
    """Read a tool catalog: a JSON array of tool objects with decimal-string costs."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return catalog_from_json(data)


def catalog_from_json(data: list) -> list[ToolSpec]:
    if not isinstance(data, list):
        raise ConfigError("tool catalog must be a JSON array")
    tools = [ToolSpec.from_dict(d) for d in data]
    check_unique_ids(tools)
    return tools


def dump_catalog(tools: Iterable[ToolSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([t.to_dict() for t in tools], fh, indent=2)
        fh.write("\n")
