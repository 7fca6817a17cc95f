"""LLM title retrieval and query-variant generation."""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass

from ..corpus import Corpus, Stage
from ..ranking import Entry, RankedList, RetrievalWarning
from ..topics import QueryVariantSet
from .client import LlmClient
from .prompts import render_prompt


class UnparseableResponseError(ValueError):
    pass


@dataclass(frozen=True)
class TitleCandidate:
    title: str
    relevance: int

    def __post_init__(self) -> None:
        if not 1 <= self.relevance <= 5:
            raise ValueError(f"relevance {self.relevance} outside 1..5")


_TITLE_KEYS = ("title", "name", "entity", "page", "wikipedia_title")
_SCORE_KEYS = ("relevance", "score", "relevance_score")
_FENCED = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _load_json(text: str):
    m = _FENCED.search(text)
    if m:
        text = m.group(1)
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    starts = [i for i in (text.find("{"), text.find("[")) if i >= 0]
    if starts:
        start = min(starts)
        end = max(text.rfind("}"), text.rfind("]"))
        if end > start:
            try:
                return json.loads(text[start:end + 1])
            except json.JSONDecodeError:
                pass
    raise UnparseableResponseError("no JSON object in LLM response")


def _pairs(obj) -> list[tuple[object, object]]:
    """Flatten the shapes models actually return into (title, score) pairs."""
    if isinstance(obj, dict):
        lists = [v for v in obj.values() if isinstance(v, list)]
        if len(obj) == 1 and lists:
            return _pairs(lists[0])
        if any(k in obj for k in _TITLE_KEYS):
            return _pairs([obj])
        return list(obj.items())
    if isinstance(obj, list):
        out = []
        for item in obj:
            if isinstance(item, dict):
                title = next((item[k] for k in _TITLE_KEYS if k in item), None)
                score = next((item[k] for k in _SCORE_KEYS if k in item), None)
                out.append((title, score))
            else:
                out.append((item, None))
        return out
    raise UnparseableResponseError(f"unexpected JSON value of type {type(obj).__name__}")


def _as_relevance(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and value.strip().isdigit():
        return int(value.strip())
    return None


def parse_title_response(text: str) -> list[TitleCandidate]:
    """Valid candidates in response order; malformed entries are dropped with a warning."""
    out = []
    for title, score in _pairs(_load_json(text)):
        rel = _as_relevance(score)
        if not isinstance(title, str) or not title.strip() or rel is None or not 1 <= rel <= 5:
            warnings.warn(f"dropping malformed title entry {title!r}: {score!r}", RetrievalWarning)
            continue
        out.append(TitleCandidate(title.strip(), rel))
    return out


def llm_retrieve(client: LlmClient, query: str, max_titles: int = 20) -> list[TitleCandidate]:
    prompt = render_prompt("retrieval", query=query)
    cands = parse_title_response(client.complete(prompt, kind="retrieval"))
    # stable sort keeps response order within a relevance level
    cands.sort(key=lambda c: -c.relevance)
    return cands[:max_titles]


def titles_to_ranked_list(candidates: list[TitleCandidate], corpus: Corpus,
                          query_id: str = "") -> RankedList:
    """Resolve titles to documents; unmatched titles are dropped and counted."""
    best: dict[str, int] = {}
    order: list[str] = []
    unmatched = 0
    stages: dict[str, int] = {}
    for cand in candidates:
        res = corpus.resolve_title(cand.title)
        stages[res.stage.value] = stages.get(res.stage.value, 0) + 1
        if res.stage is Stage.UNMATCHED:
            unmatched += 1
            continue
        doc = res.matched_doc_id
        if doc not in best:
            order.append(doc)
            best[doc] = cand.relevance
        else:
            best[doc] = max(best[doc], cand.relevance)
    order.sort(key=lambda d: -best[d])
    entries = [Entry(d, float(best[d]), r) for r, d in enumerate(order, start=1)]
    return RankedList(query_id, entries, "llm", {"unmatched": unmatched, "stages": stages})


def generate_variants(client: LlmClient, query_id: str, query: str, n: int = 5) -> QueryVariantSet:
    """Relaxed rewrites of a query; the original is always kept as a variant."""
    text = client.complete(render_prompt("variant_gen", query=query, n=n), kind="variant_gen")
    try:
        obj = _load_json(text)
        variants = [v.strip() for v in obj if isinstance(v, str) and v.strip()] if isinstance(obj, list) else []
    except UnparseableResponseError:
        variants = [ln.strip(" -*\t") for ln in text.splitlines() if ln.strip(" -*\t")]
    if not variants:
        warnings.warn(f"query {query_id!r}: no usable variants, searching the original only",
                      RetrievalWarning)
    return QueryVariantSet(query_id, query, tuple([query] + [v for v in variants[:n] if v != query]))
