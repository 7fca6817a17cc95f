"""Topic-partitioned dense retrieval with multi-variant queries."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol

import numpy as np

from .corpus import Corpus, Document
from .dense import Embedder, EmbeddingMatrix, dense_search
from .ranking import RankedList

logger = logging.getLogger(__name__)

MISC = "misc"


class UnknownTopicError(ValueError):
    pass


@dataclass(frozen=True)
class QualityRules:
    min_words: int = 50
    list_prefix: str = "List of"
    drop_disambiguation: bool = True

    def rejection(self, doc: Document) -> str | None:
        if doc.title.startswith(self.list_prefix):
            return "list article"
        if self.drop_disambiguation and (doc.disambiguation or doc.title.endswith("(disambiguation)")):
            return "disambiguation page"
        if doc.word_count < self.min_words:
            return "below word threshold"
        return None


@dataclass(frozen=True)
class QueryVariantSet:
    query_id: str
    original: str
    variants: tuple[str, ...]

    def __post_init__(self) -> None:
        variants = tuple(self.variants)
        if self.original not in variants:
            variants = (self.original,) + variants
        object.__setattr__(self, "variants", variants)


@dataclass
class TopicPartition:
    labels: tuple[str, ...]
    assignments: dict[str, str]
    indexes: dict[str, EmbeddingMatrix]
    quality_filter_log: dict[str, str] = field(default_factory=dict)

    @property
    def topic_count(self) -> int:
        return len(self.labels)

    def retained(self) -> set[str]:
        return set(self.assignments)


def read_topic_assignments(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected doc_id<TAB>topic_label")
            out[row[0]] = row[1]
    return out


def read_variants(path: str | Path) -> dict[str, QueryVariantSet]:
    """Variant sidecar: JSONL ``{query_id, variants, [original]}``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            variants = obj.get("variants") or []
            if not variants:
                raise ValueError(f"{path}:{lineno}: empty variant list")
            original = obj.get("original", variants[0])
            out[obj["query_id"]] = QueryVariantSet(obj["query_id"], original, tuple(variants))
    return out


def build_partition(
    corpus: Corpus,
    assignments: Mapping[str, str],
    embeddings: EmbeddingMatrix,
    labels: Iterable[str] | None = None,
    rules: QualityRules = QualityRules(),
) -> TopicPartition:
    """Filter the corpus and split its article vectors into per-topic indexes.

    Docs with no assignment go to ``misc``. ``labels`` is the declared label
    set; any assignment outside it is an error.
    """
    declared = tuple(sorted(set(labels) if labels is not None else set(assignments.values())))
    if MISC not in declared:
        declared = declared + (MISC,)
    allowed = set(declared)

    log: dict[str, str] = {}
    kept: dict[str, str] = {}
    for doc in corpus:
        label = assignments.get(doc.doc_id, MISC)
        if label not in allowed:
            raise UnknownTopicError(f"{doc.doc_id}: topic {label!r} not in declared labels")
        reason = rules.rejection(doc)
        if reason is None and doc.doc_id not in embeddings:
            reason = "no embedding"
        if reason is not None:
            log[doc.doc_id] = reason
            continue
        kept[doc.doc_id] = label
    for doc_id, reason in log.items():
        logger.debug("excluded %s: %s", doc_id, reason)

    by_topic: dict[str, list[str]] = {t: [] for t in declared}
    for doc_id, label in kept.items():
        by_topic[label].append(doc_id)
    indexes = {t: embeddings.subset(ids) for t, ids in by_topic.items()}
    return TopicPartition(declared, kept, indexes, log)


class TopicClassifier(Protocol):
    def classify(self, text: str, vector: np.ndarray) -> str: ...


class CentroidClassifier:
    """Routes a query to the topic whose mean document vector is closest (cosine)."""

    def __init__(self, partition: TopicPartition):
        labels, cents = [], []
        for label in partition.labels:
            index = partition.indexes[label]
            if len(index) == 0:
                continue
            c = index.vectors.mean(axis=0)
            n = np.linalg.norm(c)
            if n == 0:
                continue
            labels.append(label)
            cents.append(c / n)
        if not labels:
            raise ValueError("partition has no non-empty topics")
        self.labels = labels
        self.centroids = np.vstack(cents)

    def classify(self, text: str, vector: np.ndarray) -> str:
        sims = self.centroids @ np.asarray(vector, dtype=np.float64)
        return self.labels[int(np.argmax(sims))]


class LookupClassifier:
    """Labels from a precomputed ``text -> topic`` table (e.g. a hosted model's output)."""

    def __init__(self, table: Mapping[str, str], default: str | None = None):
        self.table = dict(table)
        self.default = default

    def classify(self, text: str, vector: np.ndarray) -> str:
        label = self.table.get(text, self.default)
        if label is None:
            raise UnknownTopicError(f"no topic label for variant {text!r}")
        return label


def route_and_search(
    partition: TopicPartition,
    variant_set: QueryVariantSet,
    classifier: TopicClassifier,
    embedder: Embedder,
    k_per_variant: int = 1000,
) -> RankedList:
    if k_per_variant < 1:
        raise ValueError("k_per_variant must be >= 1")
    vectors = embedder.embed(list(variant_set.variants))
    best: dict[str, float] = {}
    routed = []
    for text, vec in zip(variant_set.variants, vectors):
        topic = classifier.classify(text, vec)
        if topic not in partition.indexes:
            raise UnknownTopicError(f"classifier returned unknown topic {topic!r}")
        routed.append(topic)
        index = partition.indexes[topic]
        if len(index) == 0:
            continue
        for e in dense_search(index, vec, k_per_variant, variant_set.query_id):
            if e.doc_id not in best or e.score > best[e.doc_id]:
                best[e.doc_id] = e.score
    return RankedList.from_scores(
        variant_set.query_id, best.items(), "topic", k=k_per_variant,
        metadata={"routed_topics": routed},
    )
