"""Ranked result lists shared by every retrieval and reranking stage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

PROVENANCES = frozenset(
    {"sparse", "dense", "llm", "hybrid", "ltr", "llm_rerank", "topic", "external"}
)


class RetrievalWarning(UserWarning):
    """Recoverable data problem: dropped entries, unmatched ids, short pools."""


@dataclass(frozen=True)
class Entry:
    doc_id: str
    score: float
    rank: int


@dataclass
class RankedList:
    """Ordered ``(doc_id, score, rank)`` triples for one query.

    Ranks are always ``1..len``, doc ids unique and scores non-increasing;
    violations raise ``ValueError`` at construction.
    """

    query_id: str
    entries: list[Entry] = field(default_factory=list)
    provenance: str = "external"
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        seen = set()
        prev = float("inf")
        for i, e in enumerate(self.entries, start=1):
            if e.rank != i:
                raise ValueError(f"rank {e.rank} at position {i}; ranks must be 1..n")
            if e.doc_id in seen:
                raise ValueError(f"duplicate doc_id {e.doc_id!r} in ranked list")
            if e.score > prev:
                raise ValueError(f"score increases at rank {i} ({prev} -> {e.score})")
            seen.add(e.doc_id)
            prev = e.score

    @classmethod
    def from_scores(
        cls,
        query_id: str,
        scored: Iterable[tuple[str, float]],
        provenance: str,
        k: int | None = None,
        metadata: dict[str, Any] | None = None,
    ) -> "RankedList":
        """Sort by score descending, doc_id ascending, and keep the top ``k``."""
        items = sorted(scored, key=lambda p: (-p[1], p[0]))
        if k is not None:
            items = items[:k]
        entries = [Entry(d, float(s), r) for r, (d, s) in enumerate(items, start=1)]
        return cls(query_id, entries, provenance, dict(metadata or {}))

    @classmethod
    def from_order(
        cls,
        query_id: str,
        doc_ids: Sequence[str],
        provenance: str,
        metadata: dict[str, Any] | None = None,
    ) -> "RankedList":
        """Build a list from an ordering alone; scores are the ordinal ``1/rank``."""
        entries = [Entry(d, 1.0 / r, r) for r, d in enumerate(doc_ids, start=1)]
        return cls(query_id, entries, provenance, dict(metadata or {}))

    @property
    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def scores(self) -> dict[str, float]:
        return {e.doc_id: e.score for e in self.entries}

    def head(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.entries[:k], self.provenance, dict(self.metadata))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)
