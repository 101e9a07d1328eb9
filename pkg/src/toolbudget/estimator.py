"""Expected value and frequency limit of each candidate tool, estimated from experience.

Both estimates are softmax-weighted averages over past usages, with weights
``exp(temperature * sim(query, past_query))``. Weights are computed after
subtracting the largest exponent, which leaves the averages unchanged.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ConfigError, Query, ToolBudgetError, ToolSpec
from .experience import ExperienceStore, UsageRecord

SimilarityFn = Callable[[Query, Query], float]

DEFAULT_TAU = 0.15


class EmptyExperienceError(ToolBudgetError, LookupError):
    """No past usage exists for the requested tool."""


@dataclass(frozen=True)
class ToolEstimate:
    tool_id: str
    expected_value: float
    freq_constraint: float
    from_experience: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.expected_value <= 1.0:
            raise ConfigError(f"expected_value out of [0, 1]: {self.expected_value}")
        if self.freq_constraint < 0:
            raise ConfigError(f"freq_constraint must be >= 0: {self.freq_constraint}")


_TOKEN = re.compile(r"\S+")


def jaccard_similarity(a: Query, b: Query) -> float:
    """Token Jaccard overlap on lowercased whitespace tokens."""
    ta = set(_TOKEN.findall(a.text.lower()))
    tb = set(_TOKEN.findall(b.text.lower()))
    if not ta and not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


class LookupSimilarity:
    """Similarity read from a table keyed by ``"query_a_id:query_b_id"``.

    Missing pairs score ``default``. With ``symmetric`` set, the reversed key is
    tried before falling back.
    """

    def __init__(self, table: Mapping[str, float], default: float = 0.0, symmetric: bool = False):
        self.table = {str(k): float(v) for k, v in table.items()}
        self.default = float(default)
        self.symmetric = symmetric
        for k, v in self.table.items():
            if not math.isfinite(v):
                raise ConfigError(f"non-finite similarity for {k!r}")

    def __call__(self, a: Query, b: Query) -> float:
        v = self.table.get(f"{a.id}:{b.id}")
        if v is None and self.symmetric:
            v = self.table.get(f"{b.id}:{a.id}")
        return self.default if v is None else v

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> LookupSimilarity:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("similarity table must be a JSON object")
        return cls({k: float(v) for k, v in data.items()}, **kw)


def softmax_weights(sims: Sequence[float], temperature: float = 1.0) -> np.ndarray:
    z = temperature * np.asarray(sims, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ConfigError("similarity values must be finite")
    w = np.exp(z - z.max())
    return w / w.sum()


def _weighted_mean(weights: np.ndarray, xs: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    m = float(weights @ x)
    # rounding can push a convex combination a hair outside its range
    return min(max(m, float(x.min())), float(x.max()))


def _records(store: ExperienceStore, tool_id: str) -> list[UsageRecord]:
    recs = store.fetch_for_tool(tool_id)
    if not recs:
        raise EmptyExperienceError(f"no experience for tool {tool_id!r}")
    return recs


def expected_value(query: Query, tool_id: str, store: ExperienceStore, sim: SimilarityFn,
                   temperature: float = 1.0) -> float:
    recs = _records(store, tool_id)
    w = softmax_weights([sim(query, r.query) for r in recs], temperature)
    return _weighted_mean(w, [r.score for r in recs])


def episode_counts(records: Sequence[UsageRecord]) -> list[tuple[Query, int]]:
    """Distinct past queries in first-seen order with their per-episode count."""
    seen: dict[str, tuple[Query, int]] = {}
    for r in records:
        prev = seen.get(r.query.id)
        if prev is None:
            seen[r.query.id] = (r.query, r.count_in_episode)
        elif prev[1] != r.count_in_episode:
            raise ConfigError(f"inconsistent count_in_episode for query {r.query.id!r}, tool {r.tool_id!r}")
    return list(seen.values())


def estimate_frequency(query: Query, tool_id: str, store: ExperienceStore, sim: SimilarityFn,
                       tau: float = DEFAULT_TAU, temperature: float = 1.0) -> float:
    if expected_value(query, tool_id, store, sim, temperature) < tau:
        return 0.0
    groups = episode_counts(_records(store, tool_id))
    w = softmax_weights([sim(query, q) for q, _ in groups], temperature)
    return _weighted_mean(w, [c for _, c in groups])


def estimate_tool(query: Query, tool_id: str, store: ExperienceStore, sim: SimilarityFn,
                  tau: float = DEFAULT_TAU, temperature: float = 1.0) -> ToolEstimate:
    v = expected_value(query, tool_id, store, sim, temperature)
    if v < tau:
        f = 0.0
    else:
        groups = episode_counts(store.fetch_for_tool(tool_id))
        w = softmax_weights([sim(query, q) for q, _ in groups], temperature)
        f = _weighted_mean(w, [c for _, c in groups])
    return ToolEstimate(tool_id, v, f)


def estimate_all(query: Query, tools: Sequence[ToolSpec], store: ExperienceStore, sim: SimilarityFn,
                 tau: float = DEFAULT_TAU, fallback: tuple[float, float] = (0.0, 0.0),
                 temperature: float = 1.0) -> list[ToolEstimate]:
    """One estimate per tool, in input order.

    Tools with no experience get ``fallback = (value, freq)``; the frequency is
    still zeroed when the fallback value is below ``tau``.
    """
    if not tools:
        raise ConfigError("estimate_all needs at least one tool")
    out = []
    for t in tools:
        try:
            out.append(estimate_tool(query, t.id, store, sim, tau, temperature))
        except EmptyExperienceError:
            v0, f0 = fallback
            out.append(ToolEstimate(t.id, float(v0), 0.0 if v0 < tau else float(f0), from_experience=False))
    return out
