"""LLM-backed retrieval, reranking and prompt handling."""

from .client import (
    Endpoint,
    Journal,
    LlmClient,
    ReplayMissError,
    TransportError,
    identity_responder,
    request_hash,
    reverse_responder,
    window_size_of,
)
from .prompts import MissingSlotError, extract_code_block, load_template, render_prompt
from .rerank import (
    CONTEXT_MODES,
    RerankWindow,
    build_context,
    listwise_rerank,
    parse_permutation,
    window_spans,
)
from .retrieval import (
    TitleCandidate,
    UnparseableResponseError,
    generate_variants,
    llm_retrieve,
    parse_title_response,
    titles_to_ranked_list,
)

__all__ = [
    "Endpoint", "Journal", "LlmClient", "ReplayMissError", "TransportError",
    "identity_responder", "request_hash", "reverse_responder", "window_size_of",
    "MissingSlotError", "extract_code_block", "load_template", "render_prompt",
    "CONTEXT_MODES", "RerankWindow", "build_context", "listwise_rerank", "parse_permutation",
    "window_spans", "TitleCandidate", "UnparseableResponseError", "generate_variants",
    "llm_retrieve", "parse_title_response", "titles_to_ranked_list",
]
