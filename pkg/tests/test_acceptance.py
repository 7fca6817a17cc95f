"""Acceptance gate: thirteen criteria, each under its runtime budget.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import time
import warnings
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.sparse as sp

from totsearch.corpus import Corpus, Document, Stage, normalize_title
from totsearch.dense import EmbeddingMatrix, dense_search, embed_corpus, max_pool_to_articles
from totsearch.evaluation import ndcg_at_k, recall_at_k, reciprocal_rank
from totsearch.fusion import FusionConfig, assemble_hybrid, round_robin_merge
from totsearch.graph import CompositeGraph, build_composite, pagerank, write_pagerank
from totsearch.llm import LlmClient, RerankWindow, build_context, identity_responder, listwise_rerank
from totsearch.llm import llm_retrieve, reverse_responder, titles_to_ranked_list, window_spans
from totsearch.ltr import (
    FeatureContext,
    LambdaMartParams,
    LtrGroup,
    SamplingPlan,
    enumerate_space,
    predict_and_rerank,
    sample_training_set,
    split_groups,
    train_lambdamart,
)
from totsearch.ltr.tuning import GRID_SPACE, RANDOM_SPACE
from totsearch.pipeline import PipelineConfig, run_pipeline
from totsearch.ranking import RankedList, RetrievalWarning
from totsearch.sparse import bm25_search, build_sparse, tokenize
from totsearch.synth import SamplingRules, SyntheticRecord, eligible_entities, sample_entities, split_dataset
from totsearch.toy import make_collection


@contextmanager
def budget(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, budget {seconds}s"


def order(ids):
    return RankedList.from_order("q", list(ids), "external")


# -- 1 ---------------------------------------------------------------------------

def dense_power_iteration(W, damping=0.85):
    n = len(W)
    P = np.empty_like(W)
    for i in range(n):
        s = W[i].sum()
        P[i] = damping * W[i] / s + (1 - damping) / n if s > 0 else 1.0 / n
    x = np.full(n, 1.0 / n)
    for _ in range(10_000):
        nxt = x @ P
        if np.abs(nxt - x).sum() < 1e-14:
            return nxt
        x = nxt
    return x


@pytest.mark.acceptance(1, "PageRank matches dense power iteration", 5)
def test_pagerank_oracle():
    rng = np.random.default_rng(101)
    with budget(5):
        for trial in range(120):
            n = int(rng.integers(1, 51))
            W = (rng.random((n, n)) < 0.2) * rng.uniform(0.1, 2.0, (n, n))
            W[rng.random(n) < 0.3] = 0.0
            ids = [f"n{i}" for i in range(n)]
            x = pagerank(CompositeGraph(ids, sp.csr_matrix(W)), 0.85, 200, 1e-10).as_array(ids)
            np.testing.assert_allclose(x, dense_power_iteration(W), atol=1e-8, rtol=0)
            assert abs(x.sum() - 1.0) < 1e-9
            assert abs(x.mean() - 1.0 / n) < 1e-12


# -- 2 ---------------------------------------------------------------------------

@pytest.mark.acceptance(2, "composite edge weights exact", 1)
def test_composite_weights():
    with budget(1):
        emb = EmbeddingMatrix(["u", "v", "w"], np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]]))
        g = build_composite(["u", "v", "w"], [("u", "v"), ("w", "u")],
                            [("u", "Category:A", "v"), ("v", "Category:A", "w"), ("v", "Category:B", "w")],
                            emb, knn_k=1)
        expected = {("u", "v"): 1.0 + 0.5 + 0.25, ("v", "u"): 0.25, ("w", "v"): 0.25,
                    ("w", "u"): 1.0, ("v", "w"): 1.0}
        for u in "uvw":
            for v in "uvw":
                assert g.weight(u, v) == expected.get((u, v), 0.0), (u, v)

        rng = np.random.default_rng(102)
        ids = [f"d{i}" for i in range(15)]
        direct = {(ids[a], ids[b]) for a, b in rng.integers(0, 15, (30, 2)) if a != b}
        meta = [(ids[a], f"C{c}", ids[b]) for a, c, b in rng.integers(0, 15, (40, 3)) % [15, 4, 15]]
        vec = rng.standard_normal((15, 6))
        g = build_composite(ids, direct, meta, EmbeddingMatrix(ids, vec), knn_k=4)
        unit = vec / np.linalg.norm(vec, axis=1, keepdims=True)
        for i, u in enumerate(ids):
            knn = {d for _, d in sorted((-(unit[i] @ unit[j]), ids[j]) for j in range(15) if j != i)[:4]}
            for v in ids:
                paths = len({m for a, m, b in meta if (a, b) == (u, v)})
                assert g.weight(u, v) == 1.0 * ((u, v) in direct) + 0.5 * paths + 0.25 * (v in knn)


# -- 3 ---------------------------------------------------------------------------

def bm25_reference(texts, query, k1=1.2, b=0.75):
    toks = [tokenize(t) for t in texts]
    n, avgdl = len(toks), sum(map(len, toks)) / len(toks)
    scores = {}
    for i, doc in enumerate(toks):
        if not set(doc) & set(tokenize(query)):
            continue
        s = 0.0
        for term in tokenize(query):
            tf = doc.count(term)
            if tf:
                df = sum(term in d for d in toks)
                s += math.log((n - df + 0.5) / (df + 0.5) + 1) * tf * (k1 + 1) / (
                    tf + k1 * (1 - b + b * len(doc) / avgdl))
        scores[f"d{i}"] = s
    return sorted(scores.items(), key=lambda p: (-p[1], p[0]))


@pytest.mark.acceptance(3, "BM25 hand fixture and exhaustive scoring oracle", 5)
def test_bm25():
    with budget(5):
        corpus = Corpus([Document(f"d{i}", f"T{i}", [t]) for i, t in enumerate(["cat", "cat cat dog", "dog"])])
        got = bm25_search(build_sparse(corpus), "cat", 10)
        idf = math.log(1.5 / 2.5 + 1)
        hand = {"d0": idf * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 1 / (5 / 3))),
                "d1": idf * 2 * 2.2 / (2 + 1.2 * (0.25 + 0.75 * 3 / (5 / 3)))}
        assert got.doc_ids == ["d0", "d1"]
        for e in got:
            assert abs(e.score - hand[e.doc_id]) < 1e-6

        rng = np.random.default_rng(103)
        vocab = [f"w{i}" for i in range(12)]
        for _ in range(50):
            texts = [" ".join(rng.choice(vocab, int(rng.integers(1, 15)))) for _ in range(int(rng.integers(2, 20)))]
            query = " ".join(rng.choice(vocab, int(rng.integers(1, 4))))
            corpus = Corpus([Document(f"d{i}", f"T{i}", [t]) for i, t in enumerate(texts)])
            got = bm25_search(build_sparse(corpus), query, len(texts))
            want = bm25_reference(texts, query)
            np.testing.assert_allclose([e.score for e in got], [s for _, s in want], rtol=1e-12)
            # compare the ordering where the reference scores are separated
            for (d1, s1), (d2, s2) in zip(want, want[1:]):
                if s1 - s2 > 1e-9 * max(1.0, abs(s1)):
                    assert got.doc_ids.index(d1) < got.doc_ids.index(d2)


# -- 4 ---------------------------------------------------------------------------

@pytest.mark.acceptance(4, "dense top-k, max pooling and prefix property", 10)
def test_dense():
    rng = np.random.default_rng(104)
    with budget(10):
        for _ in range(200):
            n, dim = int(rng.integers(1, 60)), int(rng.integers(1, 16))
            ids = [f"d{i:03d}" for i in rng.permutation(n)]
            M = rng.standard_normal((n, dim))
            if rng.random() < 0.3:
                M = np.round(M)  # force ties
            q = rng.standard_normal(dim)
            mat = EmbeddingMatrix(ids, M)
            scores = M @ q
            full = sorted(zip(ids, scores), key=lambda p: (-p[1], p[0]))
            lists = {}
            for k in range(1, n + 1):
                got = dense_search(mat, q, k)
                assert got.doc_ids == [d for d, _ in full[:k]]
                lists[k] = got.doc_ids
            for k1 in lists:
                for k2 in lists:
                    if k1 <= k2:
                        assert lists[k2][:k1] == lists[k1]

            owners = {p: f"a{int(rng.integers(0, 8))}" for p in ids}
            pooled = max_pool_to_articles(dense_search(mat, q, n), owners)
            best = {}
            for p, s in zip(ids, scores):
                best[owners[p]] = max(best.get(owners[p], -np.inf), s)
            want = sorted(best.items(), key=lambda p: (-p[1], p[0]))
            assert pooled.doc_ids == [a for a, _ in want]
            np.testing.assert_allclose([e.score for e in pooled], [s for _, s in want])


# -- 5 ---------------------------------------------------------------------------

@pytest.mark.acceptance(5, "round-robin interleaving, dedup and worked example", 1)
def test_round_robin():
    with budget(1):
        cfg = FusionConfig(("A", "B", "C"))
        out = round_robin_merge({"A": order(["d1", "d2"]), "B": order(["d3", "d4"]), "C": order(["d5"])}, cfg)
        assert out.doc_ids == ["d1", "d3", "d5", "d2", "d4"]
        assert round_robin_merge({"A": order(["d1"]), "B": order(["d1"])}, cfg).doc_ids == ["d1"]

        rng = np.random.default_rng(105)
        for _ in range(200):
            m, L = int(rng.integers(1, 4)), int(rng.integers(1, 15))
            names = "ABC"[:m]
            src = {n: [f"{n}{i}" for i in range(L)] for n in names}
            merged = round_robin_merge({n: order(v) for n, v in src.items()},
                                       FusionConfig(tuple(names))).doc_ids
            for j in range(1, L + 1):
                assert set(merged[:m * j]) == {d for v in src.values() for d in v[:j]}
            # overlapping sources: unique output, every input doc kept once
            pool = [f"x{i}" for i in range(20)]
            srcs = {n: list(rng.permutation(pool)[:int(rng.integers(0, 12))]) for n in "ABC"}
            merged = round_robin_merge({n: order(v) for n, v in srcs.items()}, cfg).doc_ids
            assert len(merged) == len(set(merged)) == len(set().union(*map(set, srcs.values())))


# -- 6 ---------------------------------------------------------------------------

@pytest.mark.acceptance(6, "hybrid recall dominates each retriever", 10)
def test_fusion_recall_dominance():
    with budget(10):
        col = make_collection(n_docs=500, seed=0)
        idx = build_sparse(col.corpus)
        emb = embed_corpus(col.corpus, col.embedder)
        client = LlmClient.mock(col.knowledge_responder())
        qrels = col.qrels()
        recall = {m: [] for m in ("sparse", "dense", "llm", "hybrid")}
        for q in col.queries:
            s = bm25_search(idx, q.text, 100, q.query_id)
            d = dense_search(emb, col.embedder.embed_one(q.text), 100, q.query_id)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RetrievalWarning)
                l = titles_to_ranked_list(llm_retrieve(client, q.text), col.corpus, q.query_id)
            h = assemble_hybrid(l, d, s, caps=(20, 50, 50), output_cap=100)
            for single in (s, d, l):
                assert recall_at_k(h, qrels, 30) >= recall_at_k(single, qrels, 10), q.query_id
            for name, run in zip(recall, (s, d, l, h)):
                recall[name].append(recall_at_k(run, qrels, 100))
        means = {k: float(np.mean(v)) for k, v in recall.items()}
        print("mean recall@100:", means)
        assert len(col.queries) == 30
        assert means["hybrid"] > max(means["sparse"], means["dense"], means["llm"])


# -- 7 ---------------------------------------------------------------------------

@pytest.mark.acceptance(7, "LambdaMART sampling, training, search spaces, permutation", 60)
def test_lambdamart():
    rng = np.random.default_rng(107)
    with budget(60):
        ids = [f"d{i}" for i in range(150)]
        runs_d = {f"q{i}": RankedList.from_scores(f"q{i}", zip(rng.permutation(ids), np.linspace(1, 0, 150)), "dense")
                  for i in range(20)}
        runs_s = {f"q{i}": RankedList.from_scores(f"q{i}", zip(rng.permutation(ids), np.linspace(9, 0, 150)), "sparse")
                  for i in range(20)}
        ctx = FeatureContext({q: "a b c" for q in runs_d}, runs_d, runs_s,
                             {d: i for i, d in enumerate(ids)}, {d: 1 / 150 for d in ids})
        qrels = {q: {ids[int(rng.integers(0, 150))]: 1} for q in runs_d}
        for g in sample_training_set(sorted(runs_d), qrels, ctx, SamplingPlan(seed=1)):
            assert g.label_histogram() == {2: 1, 1: 5, 0: 10}
            assert len(set(g.doc_ids)) == 16

        def groups(n):
            out = []
            for i in range(n):
                X = rng.random((12, 5))
                out.append(LtrGroup(f"g{i}", [f"x{j}" for j in range(12)], X, np.digitize(X[:, 0], [0.5, 0.85])))
            return out

        model = train_lambdamart(groups(40), LambdaMartParams(), 100, groups(10))
        assert model.history[-1]["valid_ndcg"] >= 0.95
        assert len(enumerate_space(GRID_SPACE, "grid")) == 72
        trials = enumerate_space(RANDOM_SPACE, "random", 20, seed=7)
        assert len(trials) == 20 and trials == enumerate_space(RANDOM_SPACE, "random", 20, seed=7)
        for q in runs_d:
            out = predict_and_rerank(model, runs_s[q], ctx)
            assert sorted(out.doc_ids) == sorted(runs_s[q].doc_ids)


# -- 8 ---------------------------------------------------------------------------

@pytest.mark.acceptance(8, "LambdaMART lifts sparse recall@10 on >= 70% of queries", 30)
def test_lambdamart_recall_lift():
    with budget(30):
        col = make_collection(n_docs=500, queries_per_kind={"lexical": 10, "semantic": 10, "famous": 10,
                                                            "vague": 100}, seed=0)
        idx = build_sparse(col.corpus)
        emb = embed_corpus(col.corpus, col.embedder)
        pr = pagerank(build_composite(col.corpus.all_ids(), col.direct_edges, col.meta_edges, emb)).scores
        vague = col.select("vague")
        texts = {q.query_id: q.text for q in vague}
        sparse = {q.query_id: bm25_search(idx, q.text, 100, q.query_id) for q in vague}
        dense = {q.query_id: dense_search(emb, col.embedder.embed_one(q.text), 100, q.query_id) for q in vague}
        ctx = FeatureContext(texts, dense, sparse, {d.doc_id: d.pageviews for d in col.corpus}, pr)
        qrels = col.qrels(["vague"])
        qids = sorted(texts)
        perm = np.random.default_rng(0).permutation(len(qids))
        wins = 0
        for fold in range(5):
            held = {qids[i] for i in perm[fold::5]}
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RetrievalWarning)
                groups = sample_training_set([q for q in qids if q not in held], qrels, ctx, SamplingPlan(seed=0))
            tr, va = split_groups(groups, 0.8, 0)
            model = train_lambdamart(tr, LambdaMartParams(), 100, va, 0)
            for q in held:
                before = recall_at_k(sparse[q], qrels, 10)
                after = recall_at_k(predict_and_rerank(model, sparse[q], ctx), qrels, 10)
                wins += after > before
        rate = wins / len(qids)
        print(f"recall@10 improved on {rate:.0%} of {len(qids)} queries")
        assert rate >= 0.70


# -- 9 ---------------------------------------------------------------------------

@pytest.mark.acceptance(9, "sliding-window reranker", 5)
def test_sliding_window():
    with budget(5):
        corpus = Corpus([Document(f"d{i}", f"Doc {i}", ["x" * 1000, "y" * 1000]) for i in range(60)])
        assert len(window_spans(30, 20, 10)) == 2 == math.ceil((30 - 20) / 10) + 1
        cands = order([f"d{i}" for i in range(30)])
        same = listwise_rerank(LlmClient.mock(identity_responder), "q", cands, RerankWindow(), corpus)
        assert same.doc_ids == cands.doc_ids
        twenty = order([f"d{i}" for i in range(20)])
        rev = listwise_rerank(LlmClient.mock(reverse_responder), "q", twenty, RerankWindow(), corpus)
        assert rev.doc_ids == twenty.doc_ids[::-1]
        rng = np.random.default_rng(109)

        def random_reply(prompt, kind):
            size = prompt.count("\n[")
            if rng.random() < 0.3:
                return "[1] > [1]"
            return " > ".join(f"[{i + 1}]" for i in rng.permutation(size))

        for n in range(1, 61):
            c = order([f"d{i}" for i in rng.permutation(60)[:n]])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RetrievalWarning)
                out = listwise_rerank(LlmClient.mock(random_reply), "q", c, RerankWindow(), corpus)
            assert sorted(out.doc_ids) == sorted(c.doc_ids)
        assert len(build_context(corpus, "d0", "full_1500")) == 1500


# -- 10 --------------------------------------------------------------------------

@pytest.mark.acceptance(10, "title resolution stages and monotonicity", 1)
def test_title_resolution():
    with budget(1):
        films = Corpus([
            Document("D1", "Inception", [], pageviews=900),
            Document("D2", "The Matrix", [], redirects={"Matrix movie"}, pageviews=800),
            Document("D3", "Mercury (planet)", []),
            Document("D4", "Mercury", [], redirects={"Hg"}),
        ])
        cases = {"Inception": ("D1", Stage.EXACT), "matrix   MOVIE": ("D2", Stage.INEXACT),
                 "The Matrix (film)": ("D2", Stage.SHORTENED_EXACT),
                 "Hg (symbol)": ("D4", Stage.SHORTENED_INEXACT),
                 "Nonexistent Article XYZ": (None, Stage.UNMATCHED)}
        for title, (doc, stage) in cases.items():
            r = films.resolve_title(title)
            assert (r.matched_doc_id, r.stage) == (doc, stage), title

        rng = np.random.default_rng(110)
        words = ["alpha", "Beta", "gamma", "Delta", "eps"]
        for _ in range(300):
            docs = []
            for i in range(int(rng.integers(1, 8))):
                title = " ".join(rng.choice(words, int(rng.integers(1, 3))))
                redirects = {" ".join(rng.choice(words, 2))} if rng.random() < 0.5 else set()
                docs.append(Document(f"d{i}", title, [], redirects=redirects))
            corpus = Corpus(docs)
            query = " ".join(rng.choice(words, int(rng.integers(1, 3))))
            if rng.random() < 0.5:
                query += " (film)"
            r = corpus.resolve_title(query)
            key = normalize_title(query)
            if any(normalize_title(d.title) == key for d in docs):
                assert r.stage is Stage.EXACT
            elif any(normalize_title(x) == key for d in docs for x in d.redirects):
                assert r.stage is Stage.INEXACT
            else:
                assert r.stage in (Stage.SHORTENED_EXACT, Stage.SHORTENED_INEXACT, Stage.UNMATCHED)
            assert (r.matched_doc_id is None) == (r.stage is Stage.UNMATCHED)


# -- 11 --------------------------------------------------------------------------

@pytest.mark.acceptance(11, "metrics match naive references", 10)
def test_metrics():
    def ref_recall(ids, g, k):
        rel = [d for d in g if g[d] > 0]
        return sum(d in ids[:k] for d in rel) / len(rel)

    def ref_ndcg(ids, g, k):
        dcg = sum((2 ** g.get(d, 0) - 1) / math.log2(i + 2) for i, d in enumerate(ids[:k]))
        ideal = sorted(g.values(), reverse=True)[:k]
        return dcg / sum((2 ** v - 1) / math.log2(i + 2) for i, v in enumerate(ideal))

    def ref_rr(ids, g):
        return next((1 / (i + 1) for i, d in enumerate(ids) if g.get(d, 0) > 0), 0.0)

    rng = np.random.default_rng(111)
    with budget(10):
        assert abs(ndcg_at_k(order(["x", "a"]), {"q": {"a": 1}}, 10) - 1 / math.log2(3)) < 1e-9
        for _ in range(1000):
            pool = [f"d{i}" for i in range(25)]
            ids = list(rng.permutation(pool)[:int(rng.integers(0, 25))])
            judged = rng.choice(pool, int(rng.integers(1, 5)), replace=False)
            g = {d: int(rng.integers(0, 4)) for d in judged}
            g[judged[0]] = max(g[judged[0]], 1)
            k = int(rng.integers(1, 30))
            run, qrels = order(ids), {"q": g}
            assert abs(recall_at_k(run, qrels, k) - ref_recall(ids, g, k)) < 1e-12
            assert abs(ndcg_at_k(run, qrels, k) - ref_ndcg(ids, g, k)) < 1e-12
            assert reciprocal_rank(run, qrels) == ref_rr(ids, g)


# -- 12 --------------------------------------------------------------------------

@pytest.mark.acceptance(12, "entity sampling tiers, filters and split", 1)
def test_entity_sampling():
    with budget(1):
        docs, i = [], 0

        def add(n, views, words, template):
            nonlocal i
            for _ in range(n):
                docs.append(Document(f"d{i:05d}", f"T{i}", [], pageviews=views, word_count=words,
                                     infobox_template=template))
                i += 1

        add(1200, 100, 1000, "A")
        add(600, 100, 1000, "B")
        add(60, 100, 1000, "C")
        add(700, 100, 10, "A")
        add(10240, 1, 1000, "A")
        corpus = Corpus(docs)
        picked = sample_entities(corpus, SamplingRules(seed=12))
        templates = [corpus.lookup(d).infobox_template for d in picked]
        assert [templates.count(t) for t in "ABC"] == [5, 4, 2]
        assert picked == sample_entities(corpus, SamplingRules(seed=12))

        views = sorted(d.pageviews for d in docs)
        vfloor = views[math.ceil(0.8 * len(views)) - 1]
        popular = [d for d in docs if d.pageviews > vfloor]
        words = sorted(d.word_count for d in popular)
        wfloor = words[math.ceil(0.25 * len(words)) - 1]
        assert len(set(picked)) == len(picked)
        for d in map(corpus.lookup, picked):
            assert d.pageviews > vfloor and wfloor < d.word_count <= 5000 and d.infobox_template
        assert {d.doc_id for d in eligible_entities(corpus)} >= set(picked)

        recs = [SyntheticRecord(f"s{j}", f"d{j}", "q", "m") for j in range(100)]
        split = split_dataset(recs, seed=0)
        assert [sum(r.split == s for r in split) for s in ("train", "dev", "test")] == [75, 15, 10]


# -- 13 --------------------------------------------------------------------------

@pytest.mark.acceptance(13, "journal replay reproduces the run byte for byte", 30)
def test_replay_determinism(tmp_path):
    with budget(30):
        col = make_collection(n_docs=500, seed=0)
        col.write(tmp_path)
        emb = embed_corpus(col.corpus, col.embedder)
        pr = pagerank(build_composite(col.corpus.all_ids(), col.direct_edges, col.meta_edges, emb))
        write_pagerank(tmp_path / "pagerank.tsv", pr)
        texts = col.query_texts()
        idx = build_sparse(col.corpus)
        sparse = {q: bm25_search(idx, t, 100, q) for q, t in texts.items()}
        dense = {q: dense_search(emb, col.embedder.embed_one(t), 100, q) for q, t in texts.items()}
        ctx = FeatureContext(texts, dense, sparse, {d.doc_id: d.pageviews for d in col.corpus}, pr.scores)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RetrievalWarning)
            groups = sample_training_set(sorted(texts), col.qrels(), ctx)
        train_lambdamart(groups, LambdaMartParams(), 30).save(tmp_path / "model.json")

        config = {
            "name": "replay-check", "corpus": "corpus.jsonl", "queries": "queries.tsv",
            "qrels": "qrels.txt", "seed": 0, "jobs": 4,
            "retrieve": {"sparse": {"k": 100},
                         "dense": {"k": 100, "embedder": {"dim": col.embedder.dim,
                                                          "synonyms": "synonyms.json",
                                                          "vocabulary": "vocabulary.txt"}},
                         "llm": {"max_titles": 20}},
            "fuse": {"order": ["llm", "dense", "sparse"], "caps": {"llm": 20, "dense": 50, "sparse": 50}},
            "ltr": {"model": "model.json", "pagerank": "pagerank.tsv"},
            "llm_rerank": {"depth": 30, "window": 20, "stride": 10, "context": "full_1500"},
        }
        live = run_pipeline(
            PipelineConfig.from_dict({**config, "output": "live.run",
                                      "llm": {"mode": "mock", "journal": "journal.jsonl"}}, tmp_path),
            client=LlmClient.mock(col.knowledge_responder(), journal=tmp_path / "journal.jsonl"))
        replays = [run_pipeline(PipelineConfig.from_dict(
            {**config, "output": f"replay{i}.run", "llm": {"mode": "replay", "journal": "journal.jsonl"}},
            tmp_path)) for i in range(2)]
        first, second = (r.run_path.read_bytes() for r in replays)
        assert first == second
        assert first == live.run_path.read_bytes()
        assert all(r.metadata["llm"]["calls"] == 0 for r in replays)
