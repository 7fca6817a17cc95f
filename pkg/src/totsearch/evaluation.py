"""Recall, NDCG and reciprocal rank over TREC-style runs and qrels."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .ranking import Entry, RankedList, RetrievalWarning

Qrels = dict[str, dict[str, int]]


class EvaluationError(ValueError):
    pass


class RunFormatError(ValueError):
    pass


def _relevant(qrels: Mapping[str, Mapping[str, int]], query_id: str) -> dict[str, int]:
    try:
        judged = qrels[query_id]
    except KeyError:
        raise EvaluationError(f"query {query_id!r} missing from qrels") from None
    rel = {d: g for d, g in judged.items() if g > 0}
    if not rel:
        raise EvaluationError(f"query {query_id!r} has no relevant documents")
    return rel


def recall_at_k(run: RankedList, qrels: Mapping[str, Mapping[str, int]], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = _relevant(qrels, run.query_id)
    found = sum(1 for d in run.doc_ids[:k] if d in rel)
    return found / len(rel)


def ndcg_at_k(run: RankedList, qrels: Mapping[str, Mapping[str, int]], k: int,
              gain: str = "exponential") -> float:
    """DCG with ``2^rel - 1`` gain (``rel`` with ``gain="linear"``) and
    ``1/log2(rank + 1)`` discount, over the ideal DCG at the same cutoff."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = _relevant(qrels, run.query_id)
    g = (lambda r: 2.0 ** r - 1.0) if gain == "exponential" else float
    dcg = sum(g(rel[d]) / math.log2(i + 2) for i, d in enumerate(run.doc_ids[:k]) if d in rel)
    ideal = sorted(rel.values(), reverse=True)[:k]
    idcg = sum(g(r) / math.log2(i + 2) for i, r in enumerate(ideal))
    return dcg / idcg


def reciprocal_rank(run: RankedList, qrels: Mapping[str, Mapping[str, int]]) -> float:
    judged = qrels.get(run.query_id, {})
    for i, d in enumerate(run.doc_ids, start=1):
        if judged.get(d, 0) > 0:
            return 1.0 / i
    return 0.0


@dataclass
class MetricReport:
    per_query: dict[str, dict[str, float]]
    skipped: list[str] = field(default_factory=list)

    @property
    def query_count(self) -> int:
        return len(self.per_query)

    def mean(self) -> dict[str, float]:
        if not self.per_query:
            return {}
        names = next(iter(self.per_query.values())).keys()
        return {m: float(np.mean([v[m] for v in self.per_query.values()])) for m in names}

    def to_tsv(self) -> str:
        names = list(self.mean())
        lines = ["query_id\t" + "\t".join(names)]
        for qid in sorted(self.per_query):
            lines.append(qid + "\t" + "\t".join(f"{self.per_query[qid][m]:.4f}" for m in names))
        means = self.mean()
        lines.append("all\t" + "\t".join(f"{means[m]:.4f}" for m in names))
        return "\n".join(lines) + "\n"


def evaluate(runs: Mapping[str, RankedList], qrels: Mapping[str, Mapping[str, int]],
             ks: Sequence[int] = (10, 100, 1000), gain: str = "exponential",
             queries: Iterable[str] | None = None) -> MetricReport:
    """Per-query recall@k, NDCG@k and RR. Queries without any relevant
    judgment are skipped with a warning; a query in qrels but absent from
    the run scores zero."""
    qids = sorted(set(queries) if queries is not None else set(runs) | set(qrels))
    per_query: dict[str, dict[str, float]] = {}
    skipped = []
    for qid in qids:
        judged = qrels.get(qid)
        if not judged or not any(g > 0 for g in judged.values()):
            skipped.append(qid)
            continue
        run = runs.get(qid, RankedList(qid))
        row = {}
        for k in ks:
            row[f"R@{k}"] = recall_at_k(run, qrels, k)
        for k in ks:
            row[f"NDCG@{k}"] = ndcg_at_k(run, qrels, k, gain)
        row["RR"] = reciprocal_rank(run, qrels)
        per_query[qid] = row
    if skipped:
        warnings.warn(f"skipped {len(skipped)} queries without relevant judgments: "
                      f"{', '.join(skipped[:5])}", RetrievalWarning)
    return MetricReport(per_query, skipped)


def group_by_prefix(report: MetricReport, sep: str = "-") -> dict[str, dict[str, float]]:
    """Mean metrics per query-id prefix (the part before ``sep``)."""
    groups: dict[str, list[dict[str, float]]] = defaultdict(list)
    for qid, row in report.per_query.items():
        groups[qid.split(sep, 1)[0]].append(row)
    return {g: {m: float(np.mean([r[m] for r in rows])) for m in rows[0]}
            for g, rows in sorted(groups.items())}


# -- TREC files ---------------------------------------------------------------

def write_run(path: str | Path, runs: Iterable[RankedList], tag: str | None = None) -> None:
    """``qid Q0 docid rank score tag`` lines sorted by (query_id, rank).

    Scores are written with ``repr`` so a read-back is lossless.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rl in sorted(runs, key=lambda r: r.query_id):
            t = tag or rl.metadata.get("tag") or rl.provenance
            for e in rl.entries:
                fh.write(f"{rl.query_id} Q0 {e.doc_id} {e.rank} {e.score!r} {t}\n")


def read_run(path: str | Path) -> dict[str, RankedList]:
    raw: dict[str, list[tuple[int, str, float, str, int]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise RunFormatError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            qid, _, doc, rank, score, tag = parts
            try:
                raw[qid].append((int(rank), doc, float(score), tag, lineno))
            except ValueError:
                raise RunFormatError(f"{path}:{lineno}: bad rank or score") from None
    out = {}
    for qid, rows in raw.items():
        rows.sort(key=lambda r: r[0])
        seen = set()
        entries = []
        prev = math.inf
        for i, (rank, doc, score, tag, lineno) in enumerate(rows, start=1):
            if doc in seen:
                raise RunFormatError(f"{path}:{lineno}: duplicate doc {doc!r} for query {qid!r}")
            if score > prev:
                raise RunFormatError(f"{path}:{lineno}: score increases with rank for query {qid!r}")
            seen.add(doc)
            prev = score
            entries.append(Entry(doc, score, i))
        if [r[0] for r in rows] != list(range(1, len(rows) + 1)):
            warnings.warn(f"{path}: query {qid!r} has non-contiguous ranks; renumbered 1..n",
                          RetrievalWarning)
        tags = {r[3] for r in rows}
        out[qid] = RankedList(qid, entries, "external",
                              {"tag": rows[0][3] if len(tags) == 1 else sorted(tags)})
    return out


def read_qrels(path: str | Path) -> Qrels:
    qrels: Qrels = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise RunFormatError(f"{path}:{lineno}: expected 'qid 0 docid grade'")
            qid, _, doc, grade = parts
            try:
                g = int(grade)
            except ValueError:
                raise RunFormatError(f"{path}:{lineno}: grade must be an integer") from None
            if g < 0:
                raise RunFormatError(f"{path}:{lineno}: negative grade {g}")
            qrels[qid][doc] = g
    return dict(qrels)


def write_qrels(path: str | Path, qrels: Mapping[str, Mapping[str, int]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(qrels):
            for doc, g in sorted(qrels[qid].items()):
                fh.write(f"{qid} 0 {doc} {g}\n")


# -- synthetic-query correlation ------------------------------------------------

def _unit_rows(X: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(X, axis=1, keepdims=True)
    return X / np.where(n == 0, 1.0, n)


def correlation_study(original_embs, generated_embs) -> tuple[float, float]:
    """Compare generated queries to originals through their similarity structure.

    Row ``i`` of both arrays belongs to the same entity. The reference vector
    is ``cos(orig_i, orig_j)`` over all ``(i, j)``; the candidate is
    ``cos(gen_i, orig_j)``. Returns Pearson r and Kendall tau-b between them.
    """
    O = _unit_rows(np.asarray(original_embs, dtype=np.float64))
    G = _unit_rows(np.asarray(generated_embs, dtype=np.float64))
    if O.shape != G.shape:
        raise ValueError(f"shape mismatch {O.shape} vs {G.shape}")
    if O.shape[0] < 3:
        raise ValueError("need at least 3 pairs")
    ref = (O @ O.T).ravel()
    cand = (G @ O.T).ravel()
    pearson = float(np.corrcoef(ref, cand)[0, 1])
    tau = float(stats.kendalltau(ref, cand, variant="b").statistic)
    return pearson, tau
