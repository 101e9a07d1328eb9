import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from toolbudget import _kernels  # noqa: E402
from toolbudget.core import Query, ToolCost, ToolSpec  # noqa: E402
from toolbudget.executor import STOP, ToolCall  # noqa: E402
from toolbudget.simenv import SimulatedEnvironment, ToolBehavior  # noqa: E402


def tool(tid, cost):
    return ToolSpec(tid, tid, f"docs for {tid}", ToolCost.flat(cost))


class ScriptedPolicy:
    """Replays a fixed list of choices; STOP once the list runs out."""

    def __init__(self, choices):
        self.choices = list(choices)
        self.seen = []

    def use_tool(self, query, available, forbidden, observations):
        self.seen.append(([t.id for t in available], dict(forbidden), list(observations)))
        if not self.choices:
            return STOP
        c = self.choices.pop(0)
        return STOP if c is STOP else ToolCall(c)

    def summarize(self, query, observations):
        return f"{len(observations)} observations"


class AlwaysPick:
    """Picks the same tool every step; stops after seeing one interception."""

    def __init__(self, tid, stop_on_error=True):
        self.tid = tid
        self.stop_on_error = stop_on_error

    def use_tool(self, query, available, forbidden, observations):
        if self.stop_on_error and any(o.intercepted for o in observations):
            return STOP
        return ToolCall(self.tid)

    def summarize(self, query, observations):
        return "done"


def scripted_env(scripts, truth=None):
    return SimulatedEnvironment({t: ToolBehavior(script=tuple(s)) for t, s in scripts.items()}, truth or {})


@pytest.fixture
def q():
    return Query("q1", "find the weather forecast")


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    if request.param == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setenv("TOOLBUDGET_DISABLE_NUMBA", "1" if request.param == "numpy" else "0")
    return request.param


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, whatever the capture mode."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call" and "test_acceptance.py::test_c" in rep.nodeid:
                name = rep.nodeid.split("::")[-1]
                label = name[len("test_"):].split("_", 1)
                detail = dict(rep.user_properties).get("detail", "")
                lines.append((int(label[0][1:]), f"{label[0].upper()} {label[1]:<26} {outcome.upper()[:4]}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
