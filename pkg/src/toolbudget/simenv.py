"""Seeded synthetic benchmarks: tools, experience, queries, ground truth and policies.

Stands in for real APIs and an LLM agent. Each tool has a true helpfulness
rate: the probability that it works for a given query. Whether it works is
drawn once per (query, tool) from the environment seed, so a tool that fails
for a query fails on every call, and planned and unplanned runs of the same
query see the same outcomes. A query is resolved once the observations hold
the required number of helpful results from each of its required tools.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import ConfigError, Query, ToolCost, ToolSpec, catalog_from_json
from .estimator import DEFAULT_TAU, ToolEstimate
from .executor import STOP, Observation, ToolCall
from .experience import DEFAULT_ERROR_PATTERNS, ExperienceStore, HeuristicScorer, UsageRecord, load_experience

ERROR_RESULTS = (
    "error: invalid API key",
    "error: rate limit exceeded, retry later",
    "error: upstream service timed out",
    "error: resource not found",
)

_TOPICS = (
    ("weather", "forecast", "temperature", "city"),
    ("stock", "price", "market", "ticker"),
    ("movie", "rating", "actor", "release"),
    ("flight", "airport", "departure", "airline"),
    ("recipe", "ingredient", "calorie", "cuisine"),
    ("news", "headline", "trending", "keyword"),
    ("crypto", "exchange", "wallet", "coin"),
    ("music", "album", "artist", "lyrics"),
)
_FILLER = ("find", "show", "get", "list", "compare", "latest", "best", "top", "today", "for", "me", "the")


def stable_hash(*parts) -> int:
    return zlib.crc32("\x1f".join(map(str, parts)).encode("utf-8"))


@dataclass(frozen=True)
class ToolBehavior:
    """How a simulated tool answers: a fixed script, or a per-query success rate.

    A script is replayed call by call and its last entry repeats.
    """

    helpful_rate: float = 1.0
    script: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.helpful_rate <= 1.0:
            raise ConfigError(f"helpful_rate must lie in [0, 1], got {self.helpful_rate}")
        if self.script is not None:
            if not self.script:
                raise ConfigError("script must be non-empty")
            object.__setattr__(self, "script", tuple(self.script))

    def to_dict(self) -> dict:
        d = {"helpful_rate": self.helpful_rate}
        if self.script is not None:
            d["script"] = list(self.script)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ToolBehavior:
        script = d.get("script")
        return cls(float(d.get("helpful_rate", 1.0)), None if script is None else tuple(script))


class _Session:
    def __init__(self, env: SimulatedEnvironment, query: Query):
        self.env = env
        self.query = query
        self.calls: dict[str, int] = {}

    def invoke(self, tool_id: str, params: str) -> str:
        behavior = self.env.behaviors.get(tool_id)
        if behavior is None:
            raise ConfigError(f"environment has no behavior for tool {tool_id!r}")
        k = self.calls.get(tool_id, 0)
        self.calls[tool_id] = k + 1
        if behavior.script is not None:
            return behavior.script[min(k, len(behavior.script) - 1)]
        if self.env.works(self.query.id, tool_id):
            return f"{tool_id} result #{k + 1} for query {self.query.id}"
        return ERROR_RESULTS[(stable_hash(self.query.id, tool_id) + k) % len(ERROR_RESULTS)]


class SimulatedEnvironment:
    """Scripted or seeded tools plus per-query ground truth.

    ``ground_truth`` maps a query id to ``{tool_id: required helpful results}``.
    Results are judged helpful when they match none of the error patterns.
    """

    def __init__(self, behaviors: Mapping[str, ToolBehavior], ground_truth: Mapping[str, Mapping[str, int]],
                 seed: int = 0, error_patterns: Sequence[str] = DEFAULT_ERROR_PATTERNS):
        self.behaviors = dict(behaviors)
        self.ground_truth = {q: dict(req) for q, req in ground_truth.items()}
        self.seed = int(seed)
        self._judge = HeuristicScorer(error_patterns)

    def start(self, query: Query) -> _Session:
        return _Session(self, query)

    def works(self, query_id: str, tool_id: str) -> bool:
        """Whether a rate-driven tool returns useful data for this query."""
        rate = self.behaviors[tool_id].helpful_rate
        u = np.random.default_rng([self.seed, stable_hash(query_id), stable_hash(tool_id)]).random()
        return bool(u < rate)

    def is_helpful(self, result: str) -> bool:
        return self._judge.score(result) == 1

    def is_resolved(self, query: Query, observations: Sequence[Observation]) -> bool:
        required = self.ground_truth.get(query.id)
        if not required:
            return False
        got: dict[str, int] = {}
        for o in observations:
            if not o.intercepted and self.is_helpful(o.result):
                got[o.tool_id] = got.get(o.tool_id, 0) + 1
        return all(got.get(t, 0) >= n for t, n in required.items())


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_tools: int = 5
    cost_min: int = 1
    cost_max: int = 10
    budget: int = 20
    overhead: int = 0
    tau: float = DEFAULT_TAU
    n_queries: int = 50
    experience_size: int = 2000
    catalog_size: int = 64
    max_steps: int = 20

    def __post_init__(self) -> None:
        if self.cost_min < 1 or self.cost_max < self.cost_min:
            raise ConfigError(f"cost range must be positive integers with min <= max, got "
                              f"[{self.cost_min}, {self.cost_max}]")
        if self.n_tools < 1 or self.n_queries < 1 or self.experience_size < 1:
            raise ConfigError("n_tools, n_queries and experience_size must be positive")
        if self.budget <= 0 or self.overhead < 0:
            raise ConfigError("budget must be positive and overhead nonnegative")
        if self.catalog_size < self.n_tools * len(_TOPICS):
            raise ConfigError(f"catalog_size must be at least {self.n_tools * len(_TOPICS)}")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")

    @property
    def capacity(self) -> int:
        return self.budget - self.overhead

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Scenario:
    config: ScenarioConfig
    catalog: list[ToolSpec]
    experience: ExperienceStore
    queries: list[Query]
    candidates: dict[str, list[str]]
    env: SimulatedEnvironment
    tool_topics: dict[str, int] = field(default_factory=dict)

    @property
    def ground_truth(self) -> dict[str, dict[str, int]]:
        return self.env.ground_truth

    def tools_for(self, query_id: str) -> list[ToolSpec]:
        by_id = {t.id: t for t in self.catalog}
        return [by_id[t] for t in self.candidates[query_id]]

    def to_bundle(self, experience_path: str) -> dict:
        return {
            "format": "toolbudget.scenario/v1",
            "config": self.config.to_dict(),
            "catalog": [t.to_dict() for t in self.catalog],
            "experience_path": experience_path,
            "queries": [{"id": q.id, "text": q.text, "candidates": self.candidates[q.id]} for q in self.queries],
            "behaviors": {t: b.to_dict() for t, b in sorted(self.env.behaviors.items())},
            "ground_truth": {q: dict(sorted(r.items())) for q, r in self.env.ground_truth.items()},
            "env_seed": self.env.seed,
        }

    def save(self, path: str | Path, experience_name: Optional[str] = None) -> str:
        """Write the bundle JSON plus its experience JSONL; returns the bundle sha256."""
        path = Path(path)
        exp_name = experience_name or (path.stem + ".experience.jsonl")
        exp_path = path.parent / exp_name
        with open(exp_path, "w", encoding="utf-8") as fh:
            for r in self.experience:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
        bundle = self.to_bundle(exp_name)
        path.write_text(json.dumps(bundle, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return bundle_digest(bundle, exp_path.read_bytes())

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        path = Path(path)
        try:
            bundle = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not a scenario bundle ({exc})") from exc
        if bundle.get("format") != "toolbudget.scenario/v1":
            raise ConfigError(f"{path}: unsupported scenario format {bundle.get('format')!r}")
        store = load_experience(path.parent / bundle["experience_path"])
        queries = [Query(q["id"], q["text"]) for q in bundle["queries"]]
        env = SimulatedEnvironment(
            {t: ToolBehavior.from_dict(b) for t, b in bundle["behaviors"].items()},
            bundle["ground_truth"], seed=bundle.get("env_seed", 0),
        )
        return cls(
            config=ScenarioConfig.from_dict(bundle["config"]),
            catalog=catalog_from_json(bundle["catalog"]),
            experience=store,
            queries=queries,
            candidates={q["id"]: list(q["candidates"]) for q in bundle["queries"]},
            env=env,
        )


def bundle_digest(bundle: dict, experience_bytes: bytes) -> str:
    """Content hash of a scenario, independent of where its files live."""
    body = {k: v for k, v in bundle.items() if k != "experience_path"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8") + b"\0" + experience_bytes).hexdigest()


def _query_text(rng: np.random.Generator, topic: int) -> str:
    words = list(rng.choice(_TOPICS[topic], size=2, replace=False))
    words += list(rng.choice(_FILLER, size=2, replace=False))
    order = rng.permutation(len(words))
    return " ".join(str(words[i]) for i in order)


def _draw_rate(rng: np.random.Generator) -> float:
    u = rng.random()
    if u < 0.25:
        return 0.0
    if u < 0.45:
        return float(np.round(rng.uniform(0.2, 0.5), 3))
    return float(np.round(rng.uniform(0.75, 1.0), 3))


def _pick_required(rng, cands, rates, uses, works=None) -> dict[str, int]:
    # only tools that can return useful data are required, unless none can
    ok = works or (lambda t: rates[t] > 0)
    pool = [t for t in cands if ok(t)] or list(cands)
    weights = np.array([rates[t] + 0.02 for t in pool])
    n_req = min(len(pool), 1 if rng.random() < 0.5 else 2)
    chosen = rng.choice(len(pool), size=n_req, replace=False, p=weights / weights.sum())
    return {pool[i]: uses[pool[i]] for i in sorted(chosen)}


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Build a self-consistent benchmark from ``cfg``.

    Tool rates are a mix of broken (0), flaky (0.2-0.5) and reliable
    (0.75-1.0). Each tool has a natural call count (1 or 2). Past episodes use
    their required tools and, with probability 1/2, each other candidate, each
    for its natural count. Whether a tool worked in a past episode is a
    Bernoulli draw of its rate, and all of that episode's usages of the tool
    share the resulting score.
    """
    rng = np.random.default_rng(cfg.seed)
    n_topics = len(_TOPICS)
    catalog, rates, uses, topics = [], {}, {}, {}
    for i in range(cfg.catalog_size):
        tid = f"tool_{i:03d}"
        topic = i % n_topics
        cost = int(rng.integers(cfg.cost_min, cfg.cost_max + 1))
        kw = ", ".join(_TOPICS[topic])
        catalog.append(ToolSpec(tid, f"{_TOPICS[topic][0]}_api_{i}", f"Looks up {kw} data.", ToolCost.flat(cost)))
        rates[tid] = _draw_rate(rng)
        uses[tid] = 1 if rng.random() < 0.7 else 2
        topics[tid] = topic
    pools = {k: [t.id for t in catalog if topics[t.id] == k] for k in range(n_topics)}

    records: list[UsageRecord] = []
    episode = 0
    while len(records) < cfg.experience_size:
        topic = int(rng.integers(n_topics))
        cands = [str(t) for t in rng.choice(pools[topic], size=cfg.n_tools, replace=False)]
        required = _pick_required(rng, cands, rates, uses)
        q = Query(f"past_{episode:05d}", _query_text(rng, topic))
        episode += 1
        for t in cands:
            if t not in required and rng.random() >= 0.5:
                continue
            count = uses[t]
            helpful = rng.random() < rates[t]
            for k in range(count):
                result = f"{t} result #{k + 1} for query {q.id}" if helpful else str(rng.choice(ERROR_RESULTS))
                records.append(UsageRecord(q, t, f"q={q.text}", result, int(helpful), count))
    records = records[: cfg.experience_size]
    # truncation can split an episode; its shared count stays consistent
    store = ExperienceStore(records)

    env = SimulatedEnvironment({t: ToolBehavior(r) for t, r in rates.items()}, {}, seed=cfg.seed)
    queries, candidates = [], {}
    for i in range(cfg.n_queries):
        topic = int(rng.integers(n_topics))
        cands = [str(t) for t in rng.choice(pools[topic], size=cfg.n_tools, replace=False)]
        q = Query(f"q{i:04d}", _query_text(rng, topic))
        queries.append(q)
        candidates[q.id] = cands
        env.ground_truth[q.id] = _pick_required(rng, cands, rates, uses, lambda t, q=q: env.works(q.id, t))
    truth = env.ground_truth

    cost_of = {t.id: int(t.cost.total()) for t in catalog}
    if not any(sum(n * cost_of[t] for t, n in req.items()) <= cfg.capacity and
               all(env.works(q, t) for t in req) for q, req in truth.items()):
        raise ConfigError("degenerate scenario: no query is resolvable within the budget")
    return Scenario(cfg, catalog, store, queries, candidates, env, topics)


# --- scripted policies -------------------------------------------------------


class _Base:
    name = "base"

    def __init__(self, query: Query, estimates: Sequence[ToolEstimate] = (), env=None, seed: int = 0):
        self.query = query
        self.values = {e.tool_id: e.expected_value for e in estimates}
        self.env = env
        self.seed = seed

    def sufficient(self, observations) -> bool:
        return self.env is not None and self.env.is_resolved(self.query, observations)

    def summarize(self, query, observations) -> str:
        useful = [o.result for o in observations if not o.intercepted and not o.result.startswith("error")]
        if not useful:
            return "insufficient information: " + query.text
        return f"answer to '{query.text}' from {len(useful)} results: " + "; ".join(useful)


class GreedyValue(_Base):
    """Highest estimated value first; each helpful result halves that tool's appeal.

    Failed calls are retried, as an agent chasing a promising tool would.
    """

    name = "greedy"

    def use_tool(self, query, available, forbidden, observations):
        if self.sufficient(observations) or not available:
            return STOP
        helpful: dict[str, int] = {}
        for o in observations:
            if not o.intercepted and not o.result.startswith("error"):
                helpful[o.tool_id] = helpful.get(o.tool_id, 0) + 1
        best = max(
            enumerate(available),
            key=lambda it: (self.values.get(it[1].id, 0.0) / 2 ** helpful.get(it[1].id, 0), -it[0]),
        )[1]
        return ToolCall(best.id, f"q={query.text}")


class RoundRobin(_Base):
    name = "roundrobin"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self._turn = 0

    def use_tool(self, query, available, forbidden, observations):
        if self.sufficient(observations) or not available:
            return STOP
        tool = available[self._turn % len(available)]
        self._turn += 1
        return ToolCall(tool.id, f"q={query.text}")


class RandomPolicy(_Base):
    """Uniform over every candidate, forbidden ones included; stops at random."""

    name = "random"

    def __init__(self, *a, stop_prob: float = 0.1, **kw):
        super().__init__(*a, **kw)
        self.stop_prob = stop_prob
        self.rng = np.random.default_rng([self.seed, stable_hash(self.query.id), stable_hash(self.name)])

    def use_tool(self, query, available, forbidden, observations):
        if self.sufficient(observations):
            return STOP
        pool = sorted({t.id for t in available} | set(forbidden))
        if not pool or self.rng.random() < self.stop_prob:
            return STOP
        return ToolCall(pool[int(self.rng.integers(len(pool)))], f"q={query.text}")


class Stubborn(_Base):
    """Keeps calling the first tool it was offered, forbidden or not."""

    name = "stubborn"

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.target: Optional[str] = None

    def use_tool(self, query, available, forbidden, observations):
        if self.sufficient(observations):
            return STOP
        if self.target is None:
            if not available:
                return STOP
            self.target = available[0].id
        return ToolCall(self.target, f"q={query.text}")


POLICIES = {cls.name: cls for cls in (GreedyValue, RoundRobin, RandomPolicy, Stubborn)}


def scripted_policies() -> dict[str, type]:
    return dict(POLICIES)


def make_policy(name: str, query: Query, estimates: Sequence[ToolEstimate] = (), env=None, seed: int = 0):
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ConfigError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(query, estimates, env, seed)
