"""Synthetic known-item collection for desk-scale experiments.

Each document mixes common words, topic words, a *cluster* token shared with
~``cluster_size`` other documents, two tokens unique to it, and a few
*concepts*. Every concept has a document-side word and a query-side synonym.

Query kinds, each favouring a different retriever:

``lexical``
    the golden document's unique tokens; BM25 finds these.
``semantic``
    concept synonyms; only an encoder that maps synonyms together finds these.
``famous``
    nothing distinctive; a mock LLM "knows" the answer title.
``vague``
    the cluster token plus two concept synonyms: BM25 gets the golden document
    into the candidates but rarely near the top.

Documents that are the answer to some query get more pageviews and more
in-links, so popularity features carry signal.
"""

from __future__ import annotations

import json
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, Document
from .dense import HashingEmbedder
from .evaluation import write_qrels
from .llm.client import Responder, identity_responder, window_size_of

QUERY_KINDS = ("lexical", "semantic", "famous", "vague")

_CONS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


def _words(rng: np.random.Generator, n: int, syllables: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        w = "".join(rng.choice(list(_CONS)) + rng.choice(list(_VOWELS)) for _ in range(syllables))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


@dataclass
class ToyQuery:
    query_id: str
    text: str
    golden: str
    kind: str


@dataclass
class ToyCollection:
    corpus: Corpus
    queries: list[ToyQuery]
    embedder: HashingEmbedder
    direct_edges: list[tuple[str, str]]
    meta_edges: list[tuple[str, str, str]]
    topics: dict[str, str]
    unique_tokens: dict[str, list[str]] = field(repr=False, default_factory=dict)

    def query_texts(self, kinds=None) -> dict[str, str]:
        return {q.query_id: q.text for q in self.queries if kinds is None or q.kind in kinds}

    def qrels(self, kinds=None) -> dict[str, dict[str, int]]:
        return {q.query_id: {q.golden: 1} for q in self.queries if kinds is None or q.kind in kinds}

    def select(self, kind: str) -> list[ToyQuery]:
        return [q for q in self.queries if q.kind == kind]

    def knowledge_responder(self, recall: float = 1.0, seed: int = 0) -> Responder:
        """Mock LLM that knows the answers to ``famous`` queries.

        Retrieval replies list the answer (with a parenthetical suffix, so
        title resolution needs its fallback stage) plus distractors; rerank
        windows move documents carrying the answer's unique tokens to the front.
        """
        rng = np.random.default_rng(seed)
        titles = [d.title for d in self.corpus]
        answers = {q.text: q.golden for q in self.queries
                   if q.kind == "famous" and rng.random() < recall}
        markers = {q.text: self.unique_tokens[q.golden] for q in self.queries}
        corpus = self.corpus

        def respond(prompt: str, kind: str) -> str:
            m = re.search(r"TOT Query: (.*)", prompt)
            query = m.group(1).strip() if m else ""
            if kind == "retrieval":
                local = np.random.default_rng(zlib.crc32(query.encode("utf-8")))
                picks = [titles[i] for i in local.choice(len(titles), 6, replace=False)]
                payload = [{"title": t, "relevance": int(local.integers(1, 4))} for t in picks]
                payload.append({"title": "Entirely Unknown Page", "relevance": 2})
                if query in answers:
                    payload.insert(0, {"title": corpus.lookup(answers[query]).title + " (thing)",
                                       "relevance": 5})
                return json.dumps({"entities": payload})
            if kind == "rerank_window":
                size = window_size_of(prompt)
                lines = re.findall(r"^\[(\d+)\] (.*)$", prompt, re.MULTILINE)
                hits = set(markers.get(query, ()))
                first = [int(i) for i, text in lines if hits & set(text.split())]
                rest = [i for i in range(1, size + 1) if i not in first]
                return " > ".join(f"[{i}]" for i in first + rest)
            return identity_responder(prompt, kind)

        return respond

    def write(self, directory: str | Path) -> dict[str, Path]:
        """Materialize corpus, queries, qrels, edge lists and the encoder word lists."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": d / "corpus.jsonl",
            "queries": d / "queries.tsv",
            "qrels": d / "qrels.txt",
            "direct": d / "direct.tsv",
            "meta": d / "meta.tsv",
            "topics": d / "topics.tsv",
            "synonyms": d / "synonyms.json",
            "vocabulary": d / "vocabulary.txt",
        }
        self.corpus.to_jsonl(paths["corpus"])
        with open(paths["queries"], "w", encoding="utf-8", newline="\n") as fh:
            for q in self.queries:
                fh.write(f"{q.query_id}\t{q.text}\n")
        write_qrels(paths["qrels"], self.qrels())
        with open(paths["direct"], "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{u}\t{v}\n" for u, v in self.direct_edges)
        with open(paths["meta"], "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{u}\t{m}\t{v}\n" for u, m, v in self.meta_edges)
        with open(paths["topics"], "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{k}\t{v}\n" for k, v in self.topics.items())
        paths["synonyms"].write_text(json.dumps(self.embedder.synonyms, sort_keys=True),
                                     encoding="utf-8")
        paths["vocabulary"].write_text("\n".join(sorted(self.embedder.vocabulary)) + "\n",
                                       encoding="utf-8")
        return paths


def make_collection(
    n_docs: int = 500,
    queries_per_kind: dict[str, int] | None = None,
    n_topics: int = 5,
    cluster_size: int = 70,
    n_concepts: int = 200,
    embed_dim: int = 256,
    seed: int = 0,
) -> ToyCollection:
    if queries_per_kind is None:
        queries_per_kind = {"lexical": 10, "semantic": 10, "famous": 10}
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    common = _words(rng, 300, 2, taken)
    topic_words = [_words(rng, 30, 3, taken) for _ in range(n_topics)]
    concepts_doc = _words(rng, n_concepts, 3, taken)
    concepts_query = _words(rng, n_concepts, 4, taken)
    n_clusters = max(1, n_docs // cluster_size)
    cluster_tokens = _words(rng, n_clusters, 4, taken)
    title_words = _words(rng, 2 * n_docs, 3, taken)
    zipf = 1.0 / np.arange(1, len(common) + 1)
    zipf /= zipf.sum()

    doc_ids = [f"D{i:04d}" for i in range(n_docs)]
    topic_of = rng.integers(0, n_topics, n_docs)
    cluster_of = rng.permutation(np.arange(n_docs) % n_clusters)
    concepts_of = [rng.choice(n_concepts, 4, replace=False) for _ in range(n_docs)]
    unique = {d: _words(rng, 2, 5, taken) for d in doc_ids}

    n_queries = sum(queries_per_kind.values())
    golden_idx = rng.choice(n_docs, n_queries, replace=False)
    relevant = set(golden_idx.tolist())

    docs = []
    for i, d in enumerate(doc_ids):
        paragraphs = []
        for p in range(3):
            toks = list(rng.choice(common, int(rng.integers(15, 60)), p=zipf))
            toks += list(rng.choice(topic_words[topic_of[i]], 6))
            toks += [concepts_doc[c] for c in concepts_of[i][p:p + 2]]
            toks += [cluster_tokens[cluster_of[i]]] * int(rng.integers(1, 3))
            toks.append(unique[d][p % 2])
            rng.shuffle(toks)
            paragraphs.append(" ".join(toks).capitalize() + ".")
        base = rng.lognormal(10.0 if i in relevant else 7.0, 1.0)
        title = f"{title_words[2 * i].capitalize()} {title_words[2 * i + 1].capitalize()}"
        docs.append(Document(
            doc_id=d, title=title, paragraphs=paragraphs,
            redirects={f"{title_words[2 * i + 1].capitalize()} {title_words[2 * i].capitalize()}"},
            aliases={title_words[2 * i].capitalize()},
            pageviews=int(base), infobox_template=f"topic{topic_of[i]}",
        ))
    corpus = Corpus(docs)

    queries = []
    qi = 0
    for kind in QUERY_KINDS:
        for _ in range(queries_per_kind.get(kind, 0)):
            g = int(golden_idx[qi])
            noise = list(rng.choice(common, 6, p=zipf))
            topic = list(rng.choice(topic_words[topic_of[g]], 2))
            con_q = [concepts_query[c] for c in concepts_of[g]]
            if kind == "lexical":
                toks = noise + topic + unique[doc_ids[g]]
            elif kind == "semantic":
                toks = noise + topic + con_q[:3]
            elif kind == "famous":
                toks = noise + topic
            else:
                toks = noise + [cluster_tokens[cluster_of[g]]] + con_q[:2]
            rng.shuffle(toks)
            queries.append(ToyQuery(f"{kind}-{qi:03d}", " ".join(toks), doc_ids[g], kind))
            qi += 1

    # popular documents attract extra in-links
    direct = set()
    for i in range(n_docs):
        for j in rng.choice(n_docs, 3, replace=False):
            if j != i:
                direct.add((doc_ids[i], doc_ids[j]))
    rel_list = sorted(relevant)
    for i in range(n_docs):
        for j in rng.choice(rel_list, 2, replace=False):
            if j != i:
                direct.add((doc_ids[i], doc_ids[j]))
    meta = set()
    for i in range(n_docs):
        for j in rng.choice(n_docs, 1):
            if j != i and topic_of[i] == topic_of[j]:
                meta.add((doc_ids[i], f"Category:topic{topic_of[i]}", doc_ids[j]))

    synonyms = dict(zip(concepts_query, concepts_doc))
    # the stand-in encoder sees content words only
    vocab = {w for ws in topic_words for w in ws} | set(concepts_doc)
    embedder = HashingEmbedder(embed_dim, synonyms=synonyms, vocabulary=vocab)
    topics = {d: f"topic{topic_of[i]}" for i, d in enumerate(doc_ids)}
    return ToyCollection(corpus, queries, embedder, sorted(direct), sorted(meta), topics, unique)
