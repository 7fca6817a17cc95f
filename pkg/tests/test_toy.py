import json

import numpy as np

from totsearch.corpus import Stage
from totsearch.llm import LlmClient, llm_retrieve, titles_to_ranked_list
from totsearch.llm.rerank import RerankWindow, listwise_rerank
from totsearch.ranking import RankedList
from totsearch.sparse import bm25_search, build_sparse
from totsearch.toy import QUERY_KINDS, make_collection


class TestCollection:
    def test_shape_and_determinism(self):
        a = make_collection(n_docs=120, queries_per_kind={k: 3 for k in QUERY_KINDS}, seed=9)
        b = make_collection(n_docs=120, queries_per_kind={k: 3 for k in QUERY_KINDS}, seed=9)
        assert len(a.corpus) == 120 and len(a.queries) == 12
        assert [q.text for q in a.queries] == [q.text for q in b.queries]
        assert [d.paragraphs for d in a.corpus] == [d.paragraphs for d in b.corpus]
        assert len({q.golden for q in a.queries}) == 12
        assert {q.kind for q in a.queries} == set(QUERY_KINDS)

    def test_popularity_planted(self):
        toy = make_collection(n_docs=300, seed=2)
        golden = {q.golden for q in toy.queries}
        views = {d.doc_id: d.pageviews for d in toy.corpus}
        assert np.median([views[g] for g in golden]) > 5 * np.median(
            [v for d, v in views.items() if d not in golden])

    def test_lexical_queries_found_by_bm25(self):
        toy = make_collection(n_docs=300, seed=4)
        idx = build_sparse(toy.corpus)
        hits = [bm25_search(idx, q.text, 10, q.query_id).doc_ids[:1] == [q.golden]
                for q in toy.select("lexical")]
        assert np.mean(hits) >= 0.9

    def test_write(self, tmp_path):
        toy = make_collection(n_docs=50, queries_per_kind={"lexical": 2}, seed=0)
        paths = toy.write(tmp_path)
        assert all(p.exists() for p in paths.values())
        assert len(paths["queries"].read_text().splitlines()) == 2
        assert json.loads(paths["synonyms"].read_text()) == toy.embedder.synonyms


class TestKnowledgeResponder:
    def test_famous_title_resolves_through_fallback(self):
        toy = make_collection(n_docs=200, seed=5)
        client = LlmClient.mock(toy.knowledge_responder())
        for q in toy.select("famous"):
            cands = llm_retrieve(client, q.text)
            assert cands[0].relevance == 5 and cands[0].title.endswith(" (thing)")
            res = toy.corpus.resolve_title(cands[0].title)
            assert res.stage is Stage.SHORTENED_EXACT and res.matched_doc_id == q.golden
            rl = titles_to_ranked_list(cands, toy.corpus, q.query_id)
            assert rl.doc_ids[0] == q.golden and rl.metadata["unmatched"] == 1

    def test_other_queries_get_no_answer(self):
        toy = make_collection(n_docs=200, seed=5)
        client = LlmClient.mock(toy.knowledge_responder())
        q = toy.select("lexical")[0]
        assert all(c.relevance <= 3 for c in llm_retrieve(client, q.text))

    def test_rerank_moves_golden_up(self):
        toy = make_collection(n_docs=200, seed=6)
        q = toy.select("semantic")[0]
        others = [d for d in toy.corpus.all_ids() if d != q.golden][:29]
        cands = RankedList.from_order(q.query_id, others + [q.golden], "hybrid")
        out = listwise_rerank(LlmClient.mock(toy.knowledge_responder()), q.text, cands,
                              RerankWindow(), toy.corpus)
        assert out.doc_ids[0] == q.golden
