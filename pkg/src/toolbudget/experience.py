"""Past tool usages with binary usefulness labels, indexed by tool."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Protocol, Sequence

from .core import ConfigError, Query

DEFAULT_ERROR_PATTERNS = (
    r"^\s*error\b",
    r"\bexception\b",
    r"\binvalid api key\b",
    r"\brate limit",
    r"\btimed? ?out\b",
    r"\bnot found\b",
    r"\bunauthori[sz]ed\b",
)


@dataclass(frozen=True)
class UsageRecord:
    """One past invocation: query, tool, parameters, result and its usefulness.

    ``count_in_episode`` is the number of times the tool was used while resolving
    ``query`` in that past episode. ``score`` may be None when the record still
    has to be labelled by a scorer.
    """

    query: Query
    tool_id: str
    params: str
    result: str
    score: Optional[int]
    count_in_episode: int = 1

    def __post_init__(self) -> None:
        if self.score is not None and self.score not in (0, 1):
            raise ConfigError(f"score must be 0 or 1, got {self.score!r}")
        if isinstance(self.count_in_episode, bool) or int(self.count_in_episode) != self.count_in_episode:
            raise ConfigError(f"count_in_episode must be an integer, got {self.count_in_episode!r}")
        if self.count_in_episode < 1:
            raise ConfigError(f"count_in_episode must be >= 1, got {self.count_in_episode}")

    def to_dict(self) -> dict:
        d = {
            "query_id": self.query.id,
            "query_text": self.query.text,
            "tool_id": self.tool_id,
            "params": self.params,
            "result": self.result,
            "count_in_episode": self.count_in_episode,
        }
        if self.score is not None:
            d["score"] = self.score
        return d

    @classmethod
    def from_dict(cls, d: dict) -> UsageRecord:
        allowed = {"query_id", "query_text", "tool_id", "params", "result", "score", "count_in_episode"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown experience fields: {sorted(unknown)}")
        try:
            return cls(
                query=Query(str(d["query_id"]), str(d["query_text"])),
                tool_id=str(d["tool_id"]),
                params=str(d.get("params", "")),
                result=str(d["result"]),
                score=d.get("score"),
                count_in_episode=d.get("count_in_episode", 1),
            )
        except KeyError as exc:
            raise ConfigError(f"experience record missing field {exc}") from exc


class UsefulnessScorer(Protocol):
    """Judges whether a tool result helps resolve the query (1) or not (0).

    ``cost`` is charged on top of every tool call the scorer judges during an
    episode; it must also be included in the costs the planner sees.
    """

    cost: float

    def score(self, result: str, *, query: Optional[Query] = None, tool_id: Optional[str] = None,
              label: Optional[int] = None) -> int: ...


class PassThroughScorer:
    """Returns the pre-assigned label; refuses to guess when there is none."""

    cost = 0

    def score(self, result, *, query=None, tool_id=None, label=None) -> int:
        if label is None:
            raise ConfigError("pass-through scorer needs a pre-assigned label")
        return int(label)


class HeuristicScorer:
    """Flags empty results and results matching any error pattern as unhelpful."""

    def __init__(self, patterns: Sequence[str] = DEFAULT_ERROR_PATTERNS, cost=0):
        self.patterns = tuple(patterns)
        self._regex = [re.compile(p, re.IGNORECASE) for p in self.patterns]
        self.cost = cost

    def score(self, result, *, query=None, tool_id=None, label=None) -> int:
        if not result or not result.strip():
            return 0
        return 0 if any(rx.search(result) for rx in self._regex) else 1


def score_usage(record: UsageRecord, scorer: UsefulnessScorer) -> int:
    return scorer.score(record.result, query=record.query, tool_id=record.tool_id, label=record.score)


class ExperienceStore:
    """Insertion-ordered collection of :class:`UsageRecord`, indexed by tool id.

    Records sharing ``(query_id, tool_id)`` must agree on ``count_in_episode``;
    a mismatch is rejected at ingest time.
    """

    def __init__(self, records: Iterable[UsageRecord] = ()):
        self._records: list[UsageRecord] = []
        self._by_tool: dict[str, list[UsageRecord]] = {}
        self._episode_counts: dict[tuple[str, str], int] = {}
        for r in records:
            self.ingest(r)

    def ingest(self, record: UsageRecord) -> ExperienceStore:
        if record.score is None:
            raise ConfigError("records must be scored before ingest (see score_usage)")
        key = (record.query.id, record.tool_id)
        prev = self._episode_counts.get(key)
        if prev is not None and prev != record.count_in_episode:
            raise ConfigError(
                f"inconsistent count_in_episode for query {key[0]!r}, tool {key[1]!r}: "
                f"{prev} vs {record.count_in_episode}"
            )
        self._episode_counts[key] = record.count_in_episode
        self._records.append(record)
        self._by_tool.setdefault(record.tool_id, []).append(record)
        return self

    def fetch_for_tool(self, tool_id: str) -> list[UsageRecord]:
        return list(self._by_tool.get(tool_id, ()))

    def tool_ids(self) -> list[str]:
        return list(self._by_tool)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[UsageRecord]:
        return iter(self._records)


def ingest(store: ExperienceStore, record: UsageRecord) -> ExperienceStore:
    return store.ingest(record)


def load_experience(path: str | Path, scorer: Optional[UsefulnessScorer] = None) -> ExperienceStore:
    """Read a JSONL experience file; unlabelled lines are scored with ``scorer``."""
    fallback = scorer or HeuristicScorer()
    store = ExperienceStore()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = UsageRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, ConfigError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            if rec.score is None:
                rec = replace(rec, score=score_usage(rec, fallback))
            store.ingest(rec)
    return store


def dump_experience(records: Iterable[UsageRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
