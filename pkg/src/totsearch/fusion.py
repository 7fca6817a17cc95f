"""Round-robin merging of ranked lists from several retrievers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .ranking import RankedList


@dataclass(frozen=True)
class FusionConfig:
    source_order: tuple[str, ...] = ("llm", "dense", "sparse")
    caps: Mapping[str, int] = field(default_factory=dict)
    output_cap: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_order", tuple(self.source_order))
        if not self.source_order:
            raise ValueError("source_order must not be empty")
        if len(set(self.source_order)) != len(self.source_order):
            raise ValueError("source_order labels must be distinct")
        if any(c < 0 for c in self.caps.values()):
            raise ValueError("caps must be >= 0")
        if self.output_cap is not None and self.output_cap < 0:
            raise ValueError("output_cap must be >= 0")


def round_robin_merge(lists: Mapping[str, RankedList], config: FusionConfig) -> RankedList:
    """Take the next unseen candidate from each source in turn.

    Exhausted sources drop out of the cycle. A document already emitted by
    an earlier turn is skipped, so each document keeps the best position
    it reached in any source. Scores are ordinal (``1/rank``).
    """
    if not lists:
        raise ValueError("nothing to merge")
    qids = {rl.query_id for rl in lists.values()}
    if len(qids) > 1:
        raise ValueError(f"mismatched query ids: {sorted(qids)}")
    query_id = qids.pop()

    queues = []
    for name in config.source_order:
        rl = lists.get(name)
        if rl is None:
            continue
        ids = rl.doc_ids
        cap = config.caps.get(name)
        queues.append(ids if cap is None else ids[:cap])

    limit = config.output_cap
    merged: list[str] = []
    seen: set[str] = set()
    pos = [0] * len(queues)
    active = [i for i, q in enumerate(queues) if q]
    while active and (limit is None or len(merged) < limit):
        still = []
        for i in active:
            q = queues[i]
            while pos[i] < len(q) and q[pos[i]] in seen:
                pos[i] += 1
            if pos[i] < len(q):
                doc = q[pos[i]]
                pos[i] += 1
                seen.add(doc)
                merged.append(doc)
                if limit is not None and len(merged) >= limit:
                    break
            if pos[i] < len(q):
                still.append(i)
        active = still
    meta = {"source_order": list(config.source_order), "caps": dict(config.caps),
            "output_cap": config.output_cap}
    return RankedList.from_order(query_id, merged, "hybrid", meta)


def assemble_hybrid(
    llm_list: RankedList,
    dense_list: RankedList,
    sparse_list: RankedList,
    caps: tuple[int, int, int] = (20, 500, 500),
    output_cap: int | None = None,
) -> RankedList:
    """LLM, dense, sparse merged in that order after per-source truncation."""
    config = FusionConfig(("llm", "dense", "sparse"),
                          {"llm": caps[0], "dense": caps[1], "sparse": caps[2]}, output_cap)
    return round_robin_merge({"llm": llm_list, "dense": dense_list, "sparse": sparse_list}, config)
