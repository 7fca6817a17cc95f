from __future__ import annotations

import numpy as np

from ..ranking import Entry, RankedList
from .features import FeatureContext
from .lambdamart import GbmModel


def predict_and_rerank(model: GbmModel, candidates: RankedList, context: FeatureContext,
                       k: int | None = None) -> RankedList:
    """Re-sort candidates by model score; equal scores keep their original order.

    Documents whose features cannot be looked up are scored with zero
    sentinels instead of being dropped.
    """
    if len(candidates) == 0:
        return RankedList(candidates.query_id, [], "ltr", dict(candidates.metadata))
    X = np.vstack([context.features(candidates.query_id, e.doc_id, strict=False)
                   for e in candidates])
    scores = model.predict(X)
    order = np.lexsort((np.arange(len(scores)), -scores))
    if k is not None:
        order = order[:k]
    entries = [Entry(candidates.entries[i].doc_id, float(scores[i]), r)
               for r, i in enumerate(order, start=1)]
    return RankedList(candidates.query_id, entries, "ltr",
                      {**candidates.metadata, "reranker": "lambdamart", "trees": model.rounds})
