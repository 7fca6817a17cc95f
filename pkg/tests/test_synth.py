import math

import pytest
from hypothesis import given, strategies as st

from totsearch.corpus import Corpus, Document
from totsearch.llm import LlmClient
from totsearch.synth import (
    SamplingRules,
    SyntheticRecord,
    eligible_entities,
    generate_queries,
    largest_remainder,
    nearest_rank,
    picks_for_size,
    read_records,
    sample_entities,
    split_dataset,
    write_records,
)


def d(i, views, words, template):
    return Document(f"d{i:05d}", f"T{i}", ["x"], pageviews=views, word_count=words,
                    infobox_template=template)


def tiered_corpus():
    """1860 eligible docs in templates of 1200, 600 and 60, plus filler that the filters remove."""
    docs, i = [], 0
    for template, size in (("A", 1200), ("B", 600), ("C", 60)):
        for _ in range(size):
            docs.append(d(i, 100, 1000, template))
            i += 1
    for _ in range(700):  # popular but short
        docs.append(d(i, 100, 10, "A"))
        i += 1
    for _ in range(10240):  # unpopular
        docs.append(d(i, 1, 1000, "A"))
        i += 1
    return Corpus(docs)


class TestTiers:
    @pytest.mark.parametrize("size,picks", [(1200, 5), (1001, 5), (1000, 4), (501, 4), (500, 3),
                                            (101, 3), (100, 2), (51, 2), (50, 1), (11, 1), (10, 0)])
    def test_table(self, size, picks):
        assert picks_for_size(size) == picks

    def test_three_categories(self):
        corpus = tiered_corpus()
        a = sample_entities(corpus, SamplingRules(seed=5))
        assert len(a) == 11 and len(set(a)) == 11
        templates = [corpus.lookup(x).infobox_template for x in a]
        assert [templates.count(t) for t in "ABC"] == [5, 4, 2]
        assert a == sample_entities(corpus, SamplingRules(seed=5))

    def test_long_doc_excluded(self):
        docs = [d(i, 100, 6000 if i == 0 else 500 + i, "A") for i in range(20)]
        docs += [d(100 + i, 1, 500, "A") for i in range(100)]
        assert "d00000" not in {x.doc_id for x in eligible_entities(Corpus(docs))}

    def test_no_pageviews(self):
        with pytest.raises(ValueError, match="pageview"):
            sample_entities(Corpus([d(0, 0, 100, "A")]))

    def test_nearest_rank(self):
        assert nearest_rank([5, 1, 3, 2, 4], 0.8) == 4
        assert nearest_rank([5, 1, 3, 2, 4], 0.0) == 1
        assert nearest_rank(list(range(1, 101)), 0.25) == 25

    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 7000), st.sampled_from(["A", "B", None])),
                    min_size=1, max_size=200), st.integers(0, 100))
    def test_filters_hold_post_hoc(self, rows, seed):
        docs = [d(i, v, w, t) for i, (v, w, t) in enumerate(rows)]
        if all(x.pageviews == 0 for x in docs):
            return
        rules = SamplingRules(min_category_size=1, seed=seed)
        picked = sample_entities(Corpus(docs), rules)
        assert len(picked) == len(set(picked))
        views = sorted(x.pageviews for x in docs)
        floor = views[max(1, math.ceil(0.8 * len(views))) - 1]
        popular = [x for x in docs if x.pageviews > floor]
        for doc_id in picked:
            doc = Corpus(docs).lookup(doc_id)
            words = sorted(x.word_count for x in popular)
            wfloor = words[max(1, math.ceil(0.25 * len(words))) - 1]
            assert doc.pageviews > floor and wfloor < doc.word_count <= 5000 and doc.infobox_template


class TestSplit:
    def records(self, n):
        return [SyntheticRecord(f"s{i}", f"d{i}", f"q{i}", "m") for i in range(n)]

    def test_hundred(self):
        out = split_dataset(self.records(100), seed=1)
        assert [sum(r.split == s for r in out) for s in ("train", "dev", "test")] == [75, 15, 10]

    def test_seven(self):
        assert largest_remainder(7, (0.75, 0.15, 0.10)) == [5, 1, 1]
        out = split_dataset(self.records(7))
        assert [sum(r.split == s for r in out) for s in ("train", "dev", "test")] == [5, 1, 1]

    def test_deterministic_partition(self):
        a = split_dataset(self.records(40), seed=3)
        assert a == split_dataset(self.records(40), seed=3)
        assert sorted(r.query_id for r in a) == sorted(r.query_id for r in self.records(40))

    @given(st.integers(1, 500), st.integers(0, 50))
    def test_counts_within_one(self, n, seed):
        out = split_dataset(self.records(n), seed=seed)
        for s, p in zip(("train", "dev", "test"), (0.75, 0.15, 0.10)):
            assert abs(sum(r.split == s for r in out) - p * n) < 1
        assert len({r.query_id for r in out}) == n

    def test_errors(self):
        with pytest.raises(ValueError):
            split_dataset([])
        with pytest.raises(ValueError):
            split_dataset(self.records(3), (0.5, 0.2, 0.2))


class TestGenerate:
    def test_code_block_taken(self, tmp_path):
        corpus = Corpus([Document("x", "Inception", ["A heist inside dreams."])])
        seen = []

        def responder(prompt, kind):
            seen.append((prompt, kind))
            return "Here you go:\n```\nthat movie with the spinning top\n```"

        recs = generate_queries(LlmClient.mock(responder, model="m-tag"), corpus, ["x"])
        assert recs == [SyntheticRecord("synth-0", "x", "that movie with the spinning top", "m-tag")]
        assert "Inception" in seen[0][0] and "A heist inside dreams." in seen[0][0]
        assert seen[0][1] == "synth_query"
        write_records(tmp_path / "r.jsonl", recs)
        assert read_records(tmp_path / "r.jsonl") == recs
