"""Pseudo-relevance sampling of training candidates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..ranking import RankedList, RetrievalWarning
from .data import LtrGroup, query_rng
from .features import FeatureContext


@dataclass(frozen=True)
class SamplingPlan:
    n_pseudo: int = 5
    pseudo_depth: int = 10
    pseudo_source: str = "union"  # "union", "dense" or "sparse"
    n_irrelevant: int = 10
    irrelevant_ranks: tuple[int, int] = (11, 100)
    seed: int = 0

    @property
    def group_size(self) -> int:
        return 1 + self.n_pseudo + self.n_irrelevant


def golden_doc(qrels: Mapping[str, Mapping[str, int]], query_id: str) -> str:
    judged = qrels.get(query_id) or {}
    rel = [(g, d) for d, g in judged.items() if g > 0]
    if not rel:
        raise KeyError(f"query {query_id!r} has no golden document")
    return min(rel, key=lambda p: (-p[0], p[1]))[1]


def _ordered_union(lists: Iterable[list[str]]) -> list[str]:
    out, seen = [], set()
    for ids in lists:
        for d in ids:
            if d not in seen:
                seen.add(d)
                out.append(d)
    return out


def sample_candidates(query_id: str, golden: str, dense: RankedList, sparse: RankedList,
                      plan: SamplingPlan) -> list[tuple[str, int]]:
    """``(doc_id, label)`` for one query: golden 2, pseudo-relevant 1, irrelevant 0."""
    sources = {"union": [dense, sparse], "dense": [dense], "sparse": [sparse]}[plan.pseudo_source]
    top_pool = _ordered_union(rl.doc_ids[:plan.pseudo_depth] for rl in sources)
    pseudo_pool = [d for d in top_pool if d != golden]

    lo, hi = plan.irrelevant_ranks
    excluded = set(top_pool) | {golden}
    irr_pool = [d for d in _ordered_union(rl.doc_ids[lo - 1:hi] for rl in (dense, sparse))
                if d not in excluded]

    rng = query_rng(plan.seed, query_id)
    pseudo = [pseudo_pool[i] for i in
              rng.choice(len(pseudo_pool), min(plan.n_pseudo, len(pseudo_pool)), replace=False)]
    irrelevant = [irr_pool[i] for i in
                  rng.choice(len(irr_pool), min(plan.n_irrelevant, len(irr_pool)), replace=False)]
    if len(pseudo) < plan.n_pseudo or len(irrelevant) < plan.n_irrelevant:
        warnings.warn(f"query {query_id!r}: pools too small, sampled {len(pseudo)} pseudo-relevant "
                      f"and {len(irrelevant)} irrelevant", RetrievalWarning)
    return [(golden, 2)] + [(d, 1) for d in pseudo] + [(d, 0) for d in irrelevant]


def sample_training_set(
    query_ids: Iterable[str],
    qrels: Mapping[str, Mapping[str, int]],
    context: FeatureContext,
    plan: SamplingPlan = SamplingPlan(),
) -> list[LtrGroup]:
    """One labelled, featurized group per query, drawn from its dense and sparse runs."""
    groups = []
    for qid in query_ids:
        if qid not in context.dense_runs or qid not in context.sparse_runs:
            raise KeyError(f"query {qid!r} missing from the retrieval runs")
        picked = sample_candidates(qid, golden_doc(qrels, qid), context.dense_runs[qid],
                                   context.sparse_runs[qid], plan)
        feats = np.vstack([context.features(qid, d, strict=True) for d, _ in picked])
        groups.append(LtrGroup(qid, [d for d, _ in picked], feats, [y for _, y in picked]))
    return groups
