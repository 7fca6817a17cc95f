"""Listwise LLM reranking with a sliding window moving from the tail to the head."""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

from ..corpus import Corpus, UnknownDocError
from ..ranking import RankedList, RetrievalWarning
from .client import LlmClient, TransportError
from .prompts import render_prompt

CONTEXT_MODES = ("title_only", "first_sentence", "first_paragraph", "full_1500")
FULL_CONTEXT_CHARS = 1500

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
_BRACKETED = re.compile(r"\[(\d+)\]")


@dataclass(frozen=True)
class RerankWindow:
    window_size: int = 20
    stride: int = 10
    context_mode: str = "full_1500"

    def __post_init__(self) -> None:
        if not 0 < self.stride <= self.window_size:
            raise ValueError("need 0 < stride <= window_size")
        if self.context_mode not in CONTEXT_MODES:
            raise ValueError(f"unknown context mode {self.context_mode!r}")


def window_spans(n: int, window_size: int, stride: int) -> list[tuple[int, int]]:
    """Half-open ``[start, end)`` windows, last window first."""
    if n <= 0:
        return []
    spans = []
    end = n
    start = max(0, n - window_size)
    while True:
        spans.append((start, end))
        if start == 0:
            break
        end -= stride
        start = max(0, start - stride)
    return spans


def build_context(corpus: Corpus, doc_id: str, mode: str) -> str:
    doc = corpus.lookup(doc_id)
    if mode == "title_only":
        return doc.title
    first = next((p for p in doc.paragraphs if p.strip()), "")
    if mode == "first_paragraph":
        return f"{doc.title}: {first}" if first else doc.title
    if mode == "first_sentence":
        sentence = _SENTENCE_END.split(first.strip(), maxsplit=1)[0] if first else ""
        return f"{doc.title}: {sentence}" if sentence else doc.title
    if mode == "full_1500":
        return "\n".join(doc.paragraphs)[:FULL_CONTEXT_CHARS]
    raise ValueError(f"unknown context mode {mode!r}")


def parse_permutation(response: str, size: int) -> list[int] | None:
    """Zero-based order from ``[3] > [1] > [2]``; ``None`` unless it is exactly
    a permutation of ``1..size``."""
    ids = [int(x) for x in _BRACKETED.findall(response)]
    if sorted(ids) != list(range(1, size + 1)):
        return None
    return [i - 1 for i in ids]


def _window_prompt(query: str, contexts: list[str]) -> str:
    docs = "\n".join(f"[{i}] {' '.join(c.split())}" for i, c in enumerate(contexts, start=1))
    return render_prompt("rerank_window", query=query, num=len(contexts), documents=docs)


def listwise_rerank(
    client: LlmClient,
    query: str,
    candidates: RankedList,
    window: RerankWindow,
    corpus: Corpus,
    resume_from: int = 0,
) -> RankedList:
    """Rerank ``candidates`` window by window.

    A window whose answer is not a full permutation stays as it was. If the
    client fails mid-pass the order so far is returned with
    ``metadata["complete"] = False`` and ``metadata["resume_cursor"]``, the
    index of the first unfinished window; pass it back as ``resume_from``
    together with the partial list to continue.
    """
    if len(candidates) == 0:
        raise ValueError("nothing to rerank")
    order = candidates.doc_ids
    contexts: dict[str, str] = {}
    for d in order:
        try:
            contexts[d] = build_context(corpus, d, window.context_mode)
        except UnknownDocError:
            warnings.warn(f"{d!r} not in corpus; using its id as context", RetrievalWarning)
            contexts[d] = d

    spans = window_spans(len(order), window.window_size, window.stride)
    malformed = 0
    meta = {**candidates.metadata, "window_size": window.window_size, "stride": window.stride,
            "context_mode": window.context_mode, "windows": len(spans)}
    for w, (start, end) in enumerate(spans):
        if w < resume_from:
            continue
        chunk = order[start:end]
        try:
            response = client.complete(_window_prompt(query, [contexts[d] for d in chunk]),
                                       kind="rerank_window")
        except TransportError as exc:
            warnings.warn(f"query {candidates.query_id!r}: stopped at window {w}: {exc}",
                          RetrievalWarning)
            meta.update(complete=False, resume_cursor=w, malformed_windows=malformed)
            return RankedList.from_order(candidates.query_id, order, "llm_rerank", meta)
        perm = parse_permutation(response, len(chunk))
        if perm is None:
            malformed += 1
            warnings.warn(f"query {candidates.query_id!r}: malformed permutation for window "
                          f"{start + 1}..{end}; left unchanged", RetrievalWarning)
            continue
        order[start:end] = [chunk[i] for i in perm]
    meta.update(complete=True, malformed_windows=malformed)
    meta.pop("resume_cursor", None)
    return RankedList.from_order(candidates.query_id, order, "llm_rerank", meta)
