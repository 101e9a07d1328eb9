"""Budget-constrained tool-use planning.

Estimate each candidate tool's value and frequency limit from past usage,
pick invocation counts with a bounded-knapsack DP under the budget, then run
episodes that enforce the plan and blacklist tools returning unhelpful results.
"""

from .core import (
    BudgetExhaustedError,
    BudgetLedger,
    ConfigError,
    Query,
    ToolBudgetError,
    ToolCost,
    ToolSpec,
    ledger_debit,
    load_catalog,
)
from .estimator import (
    EmptyExperienceError,
    LookupSimilarity,
    ToolEstimate,
    estimate_all,
    estimate_frequency,
    expected_value,
    jaccard_similarity,
)
from .evaluation import MetricsReport, RunSettings, compare, compute_metrics, run_batch, sweep
from .executor import STOP, EpisodeTranscript, ToolCall, check_blacklist_judgment, run_episode
from .experience import (
    ExperienceStore,
    HeuristicScorer,
    PassThroughScorer,
    UsageRecord,
    ingest,
    load_experience,
    score_usage,
)
from .planner import Plan, PlanItem, PlanProblem, QuantizationConfig, make_plan, quantize, solve
from .simenv import Scenario, ScenarioConfig, SimulatedEnvironment, ToolBehavior, generate_scenario, scripted_policies

__version__ = "0.1.0"

__all__ = [
    "BudgetExhaustedError",
    "BudgetLedger",
    "check_blacklist_judgment",
    "compare",
    "compute_metrics",
    "ConfigError",
    "EmptyExperienceError",
    "EpisodeTranscript",
    "estimate_all",
    "estimate_frequency",
    "expected_value",
    "ExperienceStore",
    "generate_scenario",
    "HeuristicScorer",
    "ingest",
    "jaccard_similarity",
    "ledger_debit",
    "load_catalog",
    "load_experience",
    "LookupSimilarity",
    "make_plan",
    "MetricsReport",
    "PassThroughScorer",
    "Plan",
    "PlanItem",
    "PlanProblem",
    "QuantizationConfig",
    "quantize",
    "Query",
    "run_batch",
    "run_episode",
    "RunSettings",
    "Scenario",
    "ScenarioConfig",
    "score_usage",
    "scripted_policies",
    "SimulatedEnvironment",
    "solve",
    "STOP",
    "sweep",
    "ToolBehavior",
    "ToolBudgetError",
    "ToolCall",
    "ToolCost",
    "ToolEstimate",
    "ToolSpec",
    "UsageRecord",
]
