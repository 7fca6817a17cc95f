"""BM25 over an in-memory inverted index."""

from __future__ import annotations

import gzip
import json
import math
import re
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus
from .ranking import RankedList, RetrievalWarning

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.lower())


@dataclass
class SparseIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    k1: float = 1.2
    b: float = 0.75
    avg_doc_length: float = field(init=False)
    n_docs: int = field(init=False)

    def __post_init__(self) -> None:
        self.n_docs = len(self.doc_lengths)
        if self.n_docs == 0:
            raise ValueError("cannot build a sparse index over an empty corpus")
        self.avg_doc_length = math.fsum(self.doc_lengths.values()) / self.n_docs

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def score_all(self, query: str) -> dict[str, float]:
        """BM25 score of every document sharing at least one query term.

        Repeated query terms count once per occurrence.
        """
        scores: dict[str, float] = defaultdict(float)
        k1, b, avgdl = self.k1, self.b, self.avg_doc_length
        for term, qtf in Counter(tokenize(query)).items():
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for doc_id, tf in plist:
                norm = k1 * (1.0 - b + b * self.doc_lengths[doc_id] / avgdl)
                scores[doc_id] += qtf * idf * tf * (k1 + 1.0) / (tf + norm)
        return dict(scores)

    def save(self, path: str | Path) -> None:
        payload = {
            "format": "totsearch-sparse",
            "version": 1,
            "k1": self.k1,
            "b": self.b,
            "doc_lengths": self.doc_lengths,
            "postings": {t: [[d, tf] for d, tf in p] for t, p in self.postings.items()},
        }
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path: str | Path) -> "SparseIndex":
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "totsearch-sparse":
            raise ValueError(f"{path}: not a sparse index file")
        postings = {t: [(d, int(tf)) for d, tf in p] for t, p in payload["postings"].items()}
        return cls(postings, payload["doc_lengths"], payload["k1"], payload["b"])


def build_sparse(corpus: Corpus, k1: float = 1.2, b: float = 0.75) -> SparseIndex:
    if len(corpus) == 0:
        raise ValueError("cannot build a sparse index over an empty corpus")
    postings: dict[str, list[tuple[str, int]]] = defaultdict(list)
    lengths: dict[str, int] = {}
    for doc in corpus:
        tokens = tokenize(" ".join(doc.paragraphs))
        lengths[doc.doc_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings[term].append((doc.doc_id, tf))
    return SparseIndex(dict(postings), lengths, k1, b)


def bm25_search(index: SparseIndex, query: str, k: int, query_id: str = "") -> RankedList:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not tokenize(query):
        warnings.warn(f"query {query_id!r} is empty after tokenization", RetrievalWarning)
        return RankedList(query_id, [], "sparse", {"empty_query": True})
    scores = index.score_all(query)
    return RankedList.from_scores(query_id, scores.items(), "sparse", k=k)
