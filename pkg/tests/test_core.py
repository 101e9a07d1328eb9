import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from toolbudget.core import (
    BudgetLedger,
    ConfigError,
    Query,
    ToolCost,
    ToolSpec,
    catalog_from_json,
    dump_catalog,
    fraction_to_str,
    ledger_debit,
    load_catalog,
)


def test_cost_total_sums_components():
    c = ToolCost("0.5", "1.25", "2")
    assert c.total() == Fraction(15, 4)


def test_cost_rejects_negative_component():
    with pytest.raises(ConfigError):
        ToolCost(tool_component=-1)


def test_debit_remaining():
    ledger = BudgetLedger(20, 2)
    assert ledger_debit(ledger, ToolCost.flat(5)).remaining() == 13


def test_zero_debit_is_identity():
    ledger = BudgetLedger(20, 2)
    assert ledger.debit(ToolCost()) == ledger


def test_debit_past_budget_is_recorded():
    ledger = BudgetLedger(20, 2).debit(10).debit(9)
    assert ledger.consumed == 19
    assert not ledger.within_budget()
    assert ledger.remaining() == -1


def test_ledger_rejects_nonpositive_budget():
    with pytest.raises(ConfigError):
        BudgetLedger(0)


@given(st.lists(st.fractions(min_value=0, max_value=20, max_denominator=1000), max_size=30),
       st.fractions(min_value=0, max_value=5, max_denominator=100))
def test_ledger_exact_arithmetic(debits, overhead):
    ledger = BudgetLedger(20, overhead)
    for d in debits:
        before = ledger.consumed
        ledger = ledger.debit(d)
        assert ledger.consumed >= before
    assert ledger.remaining() == 20 - overhead - sum(debits, Fraction(0))
    assert ledger.within_budget() == (overhead + sum(debits, Fraction(0)) <= 20)


def test_tool_spec_requires_docs():
    with pytest.raises(ConfigError):
        ToolSpec("a", "a", "  ", ToolCost.flat(1))


def test_query_requires_text():
    with pytest.raises(ConfigError):
        Query("q", "")


def test_catalog_roundtrip(tmp_path):
    tools = [ToolSpec("a", "A", "does a", ToolCost("1.5", "0.25", "0")),
             ToolSpec("b", "B", "does b", ToolCost.flat(3))]
    path = tmp_path / "cat.json"
    dump_catalog(tools, path)
    raw = json.loads(path.read_text())
    assert raw[0]["cost"] == {"tool": "1.5", "llm": "0.25", "time": "0"}
    assert load_catalog(path) == tools


def test_catalog_rejects_duplicates_and_unknown_fields():
    entry = {"id": "a", "name": "A", "documentation": "x", "cost": {"tool": "1"}}
    with pytest.raises(ConfigError):
        catalog_from_json([entry, entry])
    with pytest.raises(ConfigError):
        catalog_from_json([{**entry, "price": 3}])


@pytest.mark.parametrize("x, s", [(Fraction(3), "3"), (Fraction(7, 4), "1.75"), (Fraction(1, 3), "1/3"),
                                  (Fraction(-1, 8), "-0.125")])
def test_fraction_to_str(x, s):
    assert fraction_to_str(x) == s
    assert Fraction(s) == x
