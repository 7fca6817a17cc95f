"""Entity sampling, synthetic query generation and dataset splitting."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, Document
from .llm.client import LlmClient
from .llm.prompts import extract_code_block, render_prompt

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class SamplingRules:
    pageview_percentile_floor: float = 0.80
    word_count_percentile_floor: float = 0.25
    word_count_ceiling: int = 5000
    min_category_size: int = 10
    seed: int = 0


def nearest_rank(values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the ``ceil(q * n)``-th smallest value."""
    if not len(values):
        raise ValueError("percentile of an empty population")
    ordered = sorted(values)
    k = max(1, math.ceil(q * len(ordered)))
    return ordered[k - 1]


def picks_for_size(size: int) -> int:
    """Entities drawn from a category of ``size`` eligible members."""
    if size > 1000:
        return 5
    if size > 500:
        return 4
    if size > 100:
        return 3
    if size > 10:
        return 1 if size <= 50 else 2
    return 0


def eligible_entities(corpus: Corpus, rules: SamplingRules = SamplingRules()) -> list[Document]:
    """Apply the popularity, length and infobox filters in order."""
    docs = list(corpus)
    if not docs:
        raise ValueError("empty corpus")
    if all(d.pageviews == 0 for d in docs):
        raise ValueError("corpus has no pageview data")
    view_floor = nearest_rank([d.pageviews for d in docs], rules.pageview_percentile_floor)
    popular = [d for d in docs if d.pageviews > view_floor]
    if not popular:
        return []
    word_floor = nearest_rank([d.word_count for d in popular], rules.word_count_percentile_floor)
    return [d for d in popular
            if word_floor < d.word_count <= rules.word_count_ceiling and d.infobox_template]


def sample_entities(corpus: Corpus, rules: SamplingRules = SamplingRules()) -> list[str]:
    groups: dict[str, list[str]] = defaultdict(list)
    for d in eligible_entities(corpus, rules):
        groups[d.infobox_template].append(d.doc_id)
    rng = np.random.default_rng(rules.seed)
    chosen = []
    for template in sorted(groups):
        members = sorted(groups[template])
        if len(members) < rules.min_category_size:
            continue
        n = picks_for_size(len(members))
        if n:
            chosen.extend(members[i] for i in sorted(rng.choice(len(members), n, replace=False)))
    return chosen


@dataclass
class SyntheticRecord:
    query_id: str
    doc_id: str
    query: str
    model: str
    split: str | None = None


def generate_queries(client: LlmClient, corpus: Corpus, doc_ids: Iterable[str],
                     model_tag: str | None = None, passage_chars: int = 1500,
                     prefix: str = "synth") -> list[SyntheticRecord]:
    """One synthetic query per entity, taken from the code block of the reply."""
    records = []
    for i, doc_id in enumerate(doc_ids):
        doc = corpus.lookup(doc_id)
        prompt = render_prompt("synth_query", ToTObject=doc.title,
                               Psg="\n".join(doc.paragraphs)[:passage_chars])
        text = extract_code_block(client.complete(prompt, kind="synth_query"))
        records.append(SyntheticRecord(f"{prefix}-{i}", doc_id, text, model_tag or client.model))
    return records


def largest_remainder(n: int, proportions: Sequence[float]) -> list[int]:
    quotas = [p * n for p in proportions]
    counts = [math.floor(q) for q in quotas]
    left = n - sum(counts)
    by_remainder = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in by_remainder[:left]:
        counts[i] += 1
    return counts


def split_dataset(records: Sequence[SyntheticRecord], proportions=(0.75, 0.15, 0.10),
                  seed: int = 0) -> list[SyntheticRecord]:
    """Seeded shuffle, then contiguous train/dev/test cuts sized by largest remainder."""
    if not records:
        raise ValueError("no records to split")
    if abs(sum(proportions) - 1.0) > 1e-9:
        raise ValueError("proportions must sum to 1")
    counts = largest_remainder(len(records), proportions)
    order = np.random.default_rng(seed).permutation(len(records))
    out = []
    pos = 0
    for name, c in zip(SPLITS, counts):
        for i in order[pos:pos + c]:
            r = records[i]
            out.append(SyntheticRecord(r.query_id, r.doc_id, r.query, r.model, name))
        pos += c
    return out


def write_records(path: str | Path, records: Iterable[SyntheticRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[SyntheticRecord]:
    with open(path, encoding="utf-8") as fh:
        return [SyntheticRecord(**json.loads(line)) for line in fh if line.strip()]
