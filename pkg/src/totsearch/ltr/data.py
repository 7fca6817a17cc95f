"""Training examples and the whitespace interchange format."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FEATURE_NAMES = (
    "dense_score",
    "sparse_score",
    "pageviews_normalized",
    "pagerank_score",
    "query_word_count",
)


@dataclass(frozen=True)
class LtrExample:
    query_id: str
    doc_id: str
    features: tuple[float, ...]
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1, 2):
            raise ValueError(f"label must be 0, 1 or 2, got {self.label}")
        if not all(np.isfinite(self.features)):
            raise ValueError(f"non-finite feature for {self.query_id}/{self.doc_id}")


@dataclass
class LtrGroup:
    """All examples of one query, as arrays."""

    query_id: str
    doc_ids: list[str]
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64).reshape(len(self.doc_ids), -1)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != len(self.doc_ids):
            raise ValueError("labels and doc_ids differ in length")

    def __len__(self) -> int:
        return len(self.doc_ids)

    @classmethod
    def from_examples(cls, examples: Sequence[LtrExample]) -> "LtrGroup":
        qids = {e.query_id for e in examples}
        if len(qids) != 1:
            raise ValueError("a group holds exactly one query")
        return cls(qids.pop(), [e.doc_id for e in examples],
                   np.array([e.features for e in examples]), np.array([e.label for e in examples]))

    def examples(self) -> list[LtrExample]:
        return [LtrExample(self.query_id, d, tuple(map(float, f)), int(y))
                for d, f, y in zip(self.doc_ids, self.features, self.labels)]

    def label_histogram(self) -> dict[int, int]:
        vals, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


def write_groups(path: str | Path, groups: Iterable[LtrGroup]) -> None:
    """One ``query_id doc_id label f0 .. f4`` line per example."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g in groups:
            for d, f, y in zip(g.doc_ids, g.features, g.labels):
                fh.write(" ".join([g.query_id, d, str(int(y))] + [repr(float(v)) for v in f]) + "\n")


def read_groups(path: str | Path) -> list[LtrGroup]:
    rows: dict[str, list[tuple[str, int, list[float]]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 4:
                raise ValueError(f"{path}:{lineno}: expected query_id doc_id label features...")
            try:
                rows.setdefault(parts[0], []).append(
                    (parts[1], int(parts[2]), [float(x) for x in parts[3:]]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label or feature value") from None
    return [LtrGroup(q, [r[0] for r in rs], np.array([r[2] for r in rs]), np.array([r[1] for r in rs]))
            for q, rs in rows.items()]


def split_groups(groups: Sequence[LtrGroup], train_fraction: float = 0.8,
                 seed: int = 0) -> tuple[list[LtrGroup], list[LtrGroup]]:
    """Seeded query-level split."""
    order = np.random.default_rng(seed).permutation(len(groups))
    cut = int(round(train_fraction * len(groups)))
    return [groups[i] for i in order[:cut]], [groups[i] for i in order[cut:]]


def query_rng(seed: int, query_id: str) -> np.random.Generator:
    """Per-query generator, stable regardless of which other queries are present."""
    return np.random.default_rng([seed, zlib.crc32(query_id.encode("utf-8"))])
