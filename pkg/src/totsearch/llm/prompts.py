"""Prompt templates and response text helpers."""

from __future__ import annotations

import re
import warnings
from functools import lru_cache
from importlib import resources

from ..ranking import RetrievalWarning

TEMPLATES = ("retrieval", "rerank_window", "synth_query", "variant_gen")

_SLOT = re.compile(r"\{(\w+)\}")
_FENCE = re.compile(r"```(?:[\w+.-]*\n)?(.*?)```", re.DOTALL)


class MissingSlotError(KeyError):
    pass


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in TEMPLATES:
        raise ValueError(f"unknown template {name!r}")
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def template_slots(name: str) -> set[str]:
    return set(_SLOT.findall(load_template(name)))


def render_prompt(template: str, **slots: object) -> str:
    """Fill ``{Slot}`` placeholders; every slot in the template must be supplied."""
    text = load_template(template)
    missing = sorted(template_slots(template) - set(slots))
    if missing:
        raise MissingSlotError(f"template {template!r} is missing slot {missing[0]!r}")
    return _SLOT.sub(lambda m: str(slots[m.group(1)]), text).rstrip("\n")


def extract_code_block(llm_response: str) -> str:
    """Contents of the first fenced code block, trimmed.

    Falls back to the whole response (with a warning) when there is no fence.
    A language tag directly followed by a newline is not part of the block.
    """
    if not llm_response or not llm_response.strip():
        raise ValueError("empty LLM response")
    m = _FENCE.search(llm_response)
    if m is None:
        warnings.warn("no code block in LLM response; using the full text", RetrievalWarning)
        return llm_response.strip()
    return m.group(1).strip()
