"""Batch execution and the four outcome metrics.

PBC  share of queries resolved within budget (percent)
AC   mean total cost per query
PR   share of queries resolved, budget ignored (percent)
RFBC share of queries resolved but over budget, i.e. lost only to the budget
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .core import BudgetExhaustedError, BudgetLedger, ConfigError, Query
from .estimator import SimilarityFn, estimate_all, jaccard_similarity
from .executor import EpisodeTranscript, run_episode
from .experience import HeuristicScorer, UsefulnessScorer
from .planner import QuantizationConfig, empty_plan, make_plan
from .simenv import Scenario, make_policy, stable_hash

CSV_SCHEMA = "toolbudget.metrics/v1"
CSV_COLUMNS = ("axis_value", "pbc", "ac", "pr", "rfbc", "avg_invocations", "avg_planned_cost", "n")
RFBC_DEFINITION = "rfbc = percent of all episodes with resolved and not within_budget"


@dataclass(frozen=True)
class MetricsReport:
    pbc: float
    ac: float
    pr: float
    rfbc: float
    n_episodes: int
    avg_invocations: float
    avg_planned_cost: Optional[float]
    avg_planned_value: Optional[float] = None
    avg_interceptions: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self, axis_value) -> list:
        return [axis_value, self.pbc, self.ac, self.pr, self.rfbc, self.avg_invocations,
                "" if self.avg_planned_cost is None else self.avg_planned_cost, self.n_episodes]


def compute_metrics(transcripts: Sequence[EpisodeTranscript], budget=None) -> MetricsReport:
    if not transcripts:
        raise ConfigError("compute_metrics needs at least one transcript")
    budgets = {t.budget for t in transcripts}
    if len(budgets) != 1:
        raise ConfigError(f"transcripts mix budgets: {sorted(map(str, budgets))}")
    if budget is not None and Fraction(budget) not in budgets:
        raise ConfigError(f"transcripts were run with budget {next(iter(budgets))}, not {budget}")
    n = len(transcripts)
    ok = sum(1 for t in transcripts if t.resolved and t.within_budget)
    resolved = sum(1 for t in transcripts if t.resolved)
    voided = sum(1 for t in transcripts if t.resolved and not t.within_budget)
    ac = sum((t.total_cost for t in transcripts), Fraction(0)) / n
    planned = [t for t in transcripts if t.planned_cost is not None]
    return MetricsReport(
        pbc=100 * ok / n,
        ac=float(ac),
        pr=100 * resolved / n,
        rfbc=100 * voided / n,
        n_episodes=n,
        avg_invocations=sum(t.invocation_count for t in transcripts) / n,
        avg_planned_cost=(float(sum((t.planned_cost for t in planned), Fraction(0)) / len(planned))
                          if planned else None),
        avg_planned_value=(sum(t.planned_value for t in planned) / len(planned)) if planned else None,
        avg_interceptions=sum(t.interceptions for t in transcripts) / n,
    )


@dataclass(frozen=True)
class RunSettings:
    """Everything a batch needs beyond the scenario; ``None`` means the scenario default."""

    policy: str = "greedy"
    planned: bool = True
    budget: Optional[int] = None
    overhead: Optional[int] = None
    tau: Optional[float] = None
    max_steps: Optional[int] = None
    epsilon: Optional[float] = None
    use_blacklist: Optional[bool] = None
    planning_overhead: float = 0
    interception_penalty: float = 0
    policy_seed: int = 0

    def resolved(self, scenario: Scenario) -> RunSettings:
        cfg = scenario.config
        return replace(
            self,
            budget=cfg.budget if self.budget is None else self.budget,
            overhead=cfg.overhead if self.overhead is None else self.overhead,
            tau=cfg.tau if self.tau is None else self.tau,
            max_steps=cfg.max_steps if self.max_steps is None else self.max_steps,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def plan_for(scenario: Scenario, query: Query, settings: RunSettings, sim: SimilarityFn = jaccard_similarity,
             scorer: Optional[UsefulnessScorer] = None):
    """Estimates and plan for one query; an exhausted budget yields an empty plan."""
    s = settings.resolved(scenario)
    tools = scenario.tools_for(query.id)
    estimates = estimate_all(query, tools, scenario.experience, sim, s.tau)
    ledger = BudgetLedger(s.budget, s.overhead)
    qcfg = QuantizationConfig(s.epsilon, s.max_steps) if s.epsilon is not None else None
    extra = getattr(scorer, "cost", 0) if scorer is not None else 0
    try:
        plan = make_plan(query, tools, estimates, ledger, qcfg, s.planning_overhead, extra)
    except BudgetExhaustedError:
        plan = empty_plan([t.id for t in tools], query_id=query.id)
    return estimates, plan


def run_query(scenario: Scenario, query: Query, settings: RunSettings, sim: SimilarityFn = jaccard_similarity,
              scorer: Optional[UsefulnessScorer] = None) -> EpisodeTranscript:
    s = settings.resolved(scenario)
    scorer = scorer or HeuristicScorer()
    estimates, plan = plan_for(scenario, query, s, sim, scorer)
    ledger = BudgetLedger(s.budget, s.overhead).with_overhead(s.planning_overhead)
    policy = make_policy(s.policy, query, estimates, scenario.env,
                         seed=stable_hash(scenario.config.seed, s.policy_seed))
    return run_episode(
        query, plan if s.planned else None, scenario.tools_for(query.id), policy, scenario.env, scorer, ledger,
        max_steps=s.max_steps, use_blacklist=s.use_blacklist, interception_penalty=s.interception_penalty,
        policy_name=s.policy,
    )


def run_batch(scenario: Scenario, settings: RunSettings, *, queries: Optional[Iterable[Query]] = None,
              workers: int = 1, sim: SimilarityFn = jaccard_similarity,
              scorer: Optional[UsefulnessScorer] = None,
              on_result: Optional[Callable[[EpisodeTranscript], None]] = None) -> list[EpisodeTranscript]:
    """Run every query (in order); ``on_result`` sees each transcript as it completes, in order."""
    qs = list(scenario.queries if queries is None else queries)
    job = lambda q: run_query(scenario, q, settings, sim, scorer)  # noqa: E731
    out = []
    if workers <= 1:
        for q in qs:
            t = job(q)
            out.append(t)
            if on_result:
                on_result(t)
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for t in pool.map(job, qs):
            out.append(t)
            if on_result:
                on_result(t)
    return out


def fingerprint(scenario: Scenario, settings: RunSettings) -> dict:
    s = settings.resolved(scenario)
    return {"seed": scenario.config.seed, "R": s.budget - s.overhead, "tau": s.tau, "budget": s.budget,
            "overhead": s.overhead, "policy": s.policy, "planned": s.planned}


def sweep(axis: str, values: Sequence, scenario: Scenario, settings: RunSettings,
          workers: int = 1) -> list[tuple[object, MetricsReport]]:
    """One planned batch per axis value. ``budget`` values are capacities R (overhead kept)."""
    if axis not in ("budget", "tau"):
        raise ConfigError(f"unknown sweep axis {axis!r}; use 'budget' or 'tau'")
    if list(values) != sorted(values):
        raise ConfigError("sweep values must be sorted ascending")
    base = settings.resolved(scenario)
    rows = []
    for v in values:
        if axis == "budget":
            s = replace(base, budget=base.overhead + int(v))
        else:
            s = replace(base, tau=float(v))
        rows.append((v, compute_metrics(run_batch(scenario, s, workers=workers))))
    return rows


def compare(scenario: Scenario, policy: str = "greedy", budget: Optional[int] = None,
            settings: Optional[RunSettings] = None, workers: int = 1) -> dict:
    """Planned vs unplanned runs of one policy on identical episodes.

    ``budget`` is the capacity R; the scenario overhead is added on top.
    """
    base = (settings or RunSettings()).resolved(scenario)
    base = replace(base, policy=policy)
    if budget is not None:
        base = replace(base, budget=base.overhead + int(budget))
    planned = compute_metrics(run_batch(scenario, replace(base, planned=True), workers=workers))
    unplanned = compute_metrics(run_batch(scenario, replace(base, planned=False), workers=workers))
    delta = {k: getattr(planned, k) - getattr(unplanned, k) for k in ("pbc", "ac", "pr", "rfbc", "avg_invocations")}
    return {"planned": planned, "unplanned": unplanned, "delta": delta,
            "fingerprint": fingerprint(scenario, base)}


def metrics_csv(rows: Sequence[tuple[object, MetricsReport]], header: Optional[dict] = None) -> str:
    buf = io.StringIO()
    meta = " ".join(f"{k}={v}" for k, v in (header or {}).items())
    buf.write(f"# schema: {CSV_SCHEMA}" + (f" {meta}" if meta else "") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for value, report in rows:
        w.writerow(report.csv_row(value))
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[dict]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(f"# schema: {CSV_SCHEMA}"):
        raise ConfigError("missing or unsupported metrics CSV schema line")
    return list(csv.DictReader(lines[1:]))


def report_json(report: MetricsReport, **context) -> dict:
    return {"schema": "toolbudget.report/v1", "rfbc_definition": RFBC_DEFINITION, **context,
            "metrics": report.to_dict()}


def load_transcripts(path: str | Path) -> list[EpisodeTranscript]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            d.pop("run_config", None)
            out.append(EpisodeTranscript.from_dict(d))
    return out
