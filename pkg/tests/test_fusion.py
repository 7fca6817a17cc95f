import numpy as np
import pytest
from hypothesis import given, strategies as st

from totsearch.fusion import FusionConfig, assemble_hybrid, round_robin_merge
from totsearch.ranking import RankedList


def rl(ids, prov="external", qid="q"):
    return RankedList.from_order(qid, list(ids), prov)


def merge_oracle(sources, limit=None):
    """Generator-per-source simulation of round robin with first-emission-wins."""
    out, seen = [], set()
    iters = [iter(s) for s in sources]
    live = list(range(len(iters)))
    while live:
        nxt = []
        for i in live:
            for d in iters[i]:
                if d not in seen:
                    seen.add(d)
                    out.append(d)
                    nxt.append(i)
                    break
        live = nxt
    # a source that emitted its last doc is only dropped on its next turn; harmless
    return out if limit is None else out[:limit]


def abc(*lists):
    return {name: rl(ids) for name, ids in zip("ABC", lists)}


ORDER = FusionConfig(("A", "B", "C"))


class TestRoundRobin:
    def test_interleave_example(self):
        out = round_robin_merge(abc(["d1", "d2"], ["d3", "d4"], ["d5"]), ORDER)
        assert out.doc_ids == ["d1", "d3", "d5", "d2", "d4"]
        assert out.provenance == "hybrid"
        assert [e.score for e in out] == [1 / r for r in range(1, 6)]

    def test_duplicate_collapsed(self):
        out = round_robin_merge(abc(["d1"], ["d1"]), ORDER)
        assert out.doc_ids == ["d1"]

    def test_single_source(self):
        out = round_robin_merge({"B": rl(["x", "y", "z"])}, ORDER)
        assert out.doc_ids == ["x", "y", "z"]

    def test_mismatched_queries(self):
        with pytest.raises(ValueError, match="query"):
            round_robin_merge({"A": rl(["a"], qid="q1"), "B": rl(["b"], qid="q2")}, ORDER)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(())
        with pytest.raises(ValueError):
            FusionConfig(("A", "A"))
        with pytest.raises(ValueError):
            FusionConfig(("A",), {"A": -1})

    def test_output_cap(self):
        out = round_robin_merge(abc(list("abc"), list("def")), FusionConfig(("A", "B"), output_cap=3))
        assert out.doc_ids == ["a", "d", "b"]

    def test_insertion_order_irrelevant(self):
        lists = abc(["a", "b"], ["c", "a"], ["e"])
        rev = dict(reversed(list(lists.items())))
        assert round_robin_merge(lists, ORDER).doc_ids == round_robin_merge(rev, ORDER).doc_ids

    @given(st.lists(st.lists(st.integers(0, 25), unique=True, max_size=12), min_size=1, max_size=3),
           st.none() | st.integers(0, 30))
    def test_matches_oracle(self, sources, limit):
        names = "ABC"[:len(sources)]
        lists = {n: rl([f"d{i}" for i in s]) for n, s in zip(names, sources)}
        out = round_robin_merge(lists, FusionConfig(tuple(names), output_cap=limit))
        want = merge_oracle([[f"d{i}" for i in s] for s in sources], limit)
        assert out.doc_ids == want
        assert len(out) <= sum(map(len, sources))

    @given(st.integers(1, 3), st.integers(1, 8))
    def test_strict_interleaving(self, m, L):
        sources = [[f"s{i}-{j}" for j in range(L)] for i in range(m)]
        names = "ABC"[:m]
        out = round_robin_merge({n: rl(s) for n, s in zip(names, sources)},
                                FusionConfig(tuple(names))).doc_ids
        for j in range(1, L + 1):
            assert set(out[:m * j]) == {d for s in sources for d in s[:j]}

    def test_recall_dominance_random(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            pool = [f"d{i}" for i in range(40)]
            sources = [list(rng.permutation(pool)[:int(rng.integers(0, 20))]) for _ in range(3)]
            relevant = set(rng.choice(pool, 3, replace=False))
            out = round_robin_merge({n: rl(s) for n, s in zip("ABC", sources)}, ORDER).doc_ids
            for j in range(1, 21):
                best = max(len(relevant & set(s[:j])) for s in sources)
                assert len(relevant & set(out[:3 * j])) >= best


class TestAssembleHybrid:
    def test_caps_bound_length(self):
        big = lambda p: rl([f"{p}{i}" for i in range(600)])
        out = assemble_hybrid(big("l"), big("d"), big("s"), (20, 500, 500))
        assert len(out) == 1020
        assert out.metadata["caps"] == {"llm": 20, "dense": 500, "sparse": 500}

    def test_dense_passthrough(self):
        dense = rl(["a", "b", "c"])
        out = assemble_hybrid(rl(["x"]), dense, rl(["y"]), (0, 3, 0))
        assert out.doc_ids == dense.doc_ids

    def test_disjoint_all_present(self):
        lists = [rl([f"{p}{i}" for i in range(10)]) for p in "lds"]
        out = assemble_hybrid(*lists, caps=(10, 10, 10), output_cap=30)
        assert sorted(out.doc_ids) == sorted(d for x in lists for d in x.doc_ids)

    def test_empty_inputs(self):
        out = assemble_hybrid(rl([]), rl(["a"]), rl([]))
        assert out.doc_ids == ["a"]
