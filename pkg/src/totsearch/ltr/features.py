"""The five reranking features for a (query, document) pair."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..corpus import UnknownDocError
from ..ranking import RankedList


@dataclass
class FeatureContext:
    """Lookup tables shared by sampling, training and inference.

    Pageviews are min-max normalized over the whole ``pageviews`` table.
    """

    queries: Mapping[str, str]
    dense_runs: Mapping[str, RankedList]
    sparse_runs: Mapping[str, RankedList]
    pageviews: Mapping[str, int]
    pagerank: Mapping[str, float]
    _pv_min: float = field(init=False, repr=False)
    _pv_span: float = field(init=False, repr=False)
    _score_cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        vals = np.fromiter(self.pageviews.values(), dtype=np.float64) if self.pageviews else np.zeros(1)
        self._pv_min = float(vals.min())
        self._pv_span = float(vals.max() - vals.min())

    def normalized_pageviews(self, doc_id: str) -> float:
        if doc_id not in self.pageviews:
            raise UnknownDocError(doc_id)
        if self._pv_span == 0:
            return 0.0
        return (self.pageviews[doc_id] - self._pv_min) / self._pv_span

    def _scores(self, runs: Mapping[str, RankedList], query_id: str) -> dict[str, float]:
        key = (id(runs), query_id)
        if key not in self._score_cache:
            rl = runs.get(query_id)
            self._score_cache[key] = rl.scores() if rl is not None else {}
        return self._score_cache[key]

    def features(self, query_id: str, doc_id: str, strict: bool = True) -> np.ndarray:
        """Feature vector; with ``strict=False`` unknown docs get 0.0 sentinels."""
        dense = self._scores(self.dense_runs, query_id).get(doc_id, 0.0)
        sparse = self._scores(self.sparse_runs, query_id).get(doc_id, 0.0)
        try:
            pv = self.normalized_pageviews(doc_id)
        except UnknownDocError:
            if strict:
                raise
            pv = 0.0
        if doc_id in self.pagerank:
            pr = self.pagerank[doc_id]
        elif strict:
            raise UnknownDocError(doc_id)
        else:
            pr = 0.0
        words = len(self.queries.get(query_id, "").split())
        return np.array([dense, sparse, pv, pr, float(words)])


def extract_features(query_id: str, doc_id: str, context: FeatureContext) -> np.ndarray:
    return context.features(query_id, doc_id, strict=True)
