"""Command-line entry point: ``totsearch <command> [<subcommand>] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .corpus import ingest_corpus
from .dense import (
    HashingEmbedder,
    dense_search,
    embed_corpus,
    load_embeddings,
    max_pool_to_articles,
    write_embeddings,
)
from .evaluation import evaluate, group_by_prefix, read_qrels, read_run, write_run
from .fusion import FusionConfig, round_robin_merge
from .graph import CompositeGraph, build_composite, pagerank, read_edges, read_pagerank, write_pagerank
from .llm.client import Endpoint, LlmClient
from .llm.rerank import RerankWindow, listwise_rerank
from .llm.retrieval import generate_variants, llm_retrieve, titles_to_ranked_list
from .ltr import (
    FeatureContext,
    GbmModel,
    LambdaMartParams,
    SamplingPlan,
    enumerate_space,
    hyperparameter_search,
    predict_and_rerank,
    read_groups,
    sample_training_set,
    split_groups,
    train_lambdamart,
    write_groups,
)
from .ltr.tuning import GRID_SPACE, RANDOM_SPACE
from .pipeline import RESPONDERS, PipelineConfig, read_queries, report, run_pipeline
from .ranking import RankedList
from .sparse import SparseIndex, bm25_search, build_sparse
from .synth import SamplingRules, generate_queries, read_records, sample_entities, split_dataset, write_records
from .topics import (
    CentroidClassifier,
    LookupClassifier,
    build_partition,
    read_topic_assignments,
    read_variants,
    route_and_search,
)

logger = logging.getLogger("totsearch")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _client(args) -> LlmClient:
    if args.llm_mode == "replay":
        if not args.journal:
            raise SystemExit("--llm-mode replay needs --journal")
        return LlmClient.replay(args.journal)
    if args.llm_mode == "remote":
        if not (args.llm_base_url and args.llm_model):
            raise SystemExit("--llm-mode remote needs --llm-base-url and --llm-model")
        return LlmClient.remote(Endpoint(args.llm_base_url, args.llm_model), journal=args.journal)
    return LlmClient.mock(RESPONDERS[args.llm_responder], journal=args.journal)


def _per_query(fn: Callable[[str, str], RankedList], queries: dict[str, str], jobs: int) -> list[RankedList]:
    qids = sorted(queries)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda q: fn(q, queries[q]), qids))


def _embedder(args) -> HashingEmbedder:
    synonyms = json.loads(Path(args.synonyms).read_text(encoding="utf-8")) if args.synonyms else None
    vocab = Path(args.vocabulary).read_text(encoding="utf-8").split() if args.vocabulary else None
    return HashingEmbedder(args.dim, synonyms, vocab)


def _context(args, queries) -> FeatureContext:
    corpus = ingest_corpus(args.corpus)
    return FeatureContext(queries, read_run(args.dense_run), read_run(args.sparse_run),
                          {d.doc_id: d.pageviews for d in corpus}, read_pagerank(args.pagerank))


# -- commands -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    corpus = ingest_corpus(args.corpus, args.format)
    if args.out:
        corpus.to_jsonl(args.out)
    views = [d.pageviews for d in corpus]
    print(f"documents\t{len(corpus)}")
    print(f"with_pageviews\t{sum(v > 0 for v in views)}")
    print(f"with_infobox\t{sum(bool(d.infobox_template) for d in corpus)}")
    return 0


def cmd_index_sparse(args) -> int:
    index = build_sparse(ingest_corpus(args.corpus), args.k1, args.b)
    index.save(args.out)
    print(f"indexed {index.n_docs} documents, {len(index.postings)} terms -> {args.out}")
    return 0


def cmd_index_dense(args) -> int:
    matrix = embed_corpus(ingest_corpus(args.corpus), _embedder(args), args.granularity,
                          args.chunk_size, args.overlap)
    write_embeddings(args.out, matrix)
    print(f"wrote {len(matrix)} {args.granularity} vectors of dim {matrix.dim} -> {args.out}")
    return 0


def cmd_graph_build(args) -> int:
    corpus = ingest_corpus(args.corpus)
    direct = read_edges(args.direct, 2) if args.direct else []
    meta = read_edges(args.meta, 3) if args.meta else []
    emb = load_embeddings(args.embeddings, "article") if args.embeddings else None
    a1, a2, a3 = (float(x) for x in args.alphas.split(","))
    graph = build_composite(corpus.all_ids(), direct, meta, emb, a1, a2, a3, args.knn_k,
                            meta_counted=not args.binary_meta)
    graph.save(args.out)
    print(f"graph with {graph.n} nodes and {graph.weights.nnz} weighted edges -> {args.out}")
    return 0


def cmd_graph_pagerank(args) -> int:
    pr = pagerank(CompositeGraph.load(args.graph), args.damping, args.max_iter, args.tol)
    write_pagerank(args.out, pr)
    state = "converged" if pr.converged else "NOT converged"
    print(f"{state} after {pr.iterations_run} iterations (residual {pr.residual:.3e}) -> {args.out}")
    return 0 if pr.converged else 1


def cmd_retrieve_sparse(args) -> int:
    index = SparseIndex.load(args.index)
    runs = _per_query(lambda q, t: bm25_search(index, t, args.k, q), read_queries(args.queries), args.jobs)
    write_run(args.out, runs, tag=args.tag or "sparse")
    return 0


def cmd_retrieve_dense(args) -> int:
    matrix = load_embeddings(args.embeddings)
    queries = read_queries(args.queries)
    if args.query_embeddings:
        qm = load_embeddings(args.query_embeddings)
        vec = {q: qm.row(q) for q in queries}
    else:
        vec = dict(zip(queries, _embedder(args).embed(list(queries.values()))))

    def one(qid: str, _text: str) -> RankedList:
        if matrix.granularity == "paragraph":
            hits = dense_search(matrix, vec[qid], args.k * args.pool_factor, qid)
            return max_pool_to_articles(hits, {p: p.split("#", 1)[0] for p in hits.doc_ids}).head(args.k)
        return dense_search(matrix, vec[qid], args.k, qid)

    write_run(args.out, _per_query(one, queries, args.jobs), tag=args.tag or "dense")
    return 0


def cmd_retrieve_llm(args) -> int:
    corpus = ingest_corpus(args.corpus)
    client = _client(args)
    runs = _per_query(lambda q, t: titles_to_ranked_list(llm_retrieve(client, t, args.max_titles), corpus, q),
                      read_queries(args.queries), args.jobs)
    unmatched = sum(r.metadata["unmatched"] for r in runs)
    write_run(args.out, runs, tag=args.tag or "llm")
    print(f"{len(runs)} queries, {unmatched} unmatched titles")
    return 0


def cmd_retrieve_topic(args) -> int:
    corpus = ingest_corpus(args.corpus)
    emb = load_embeddings(args.embeddings, "article")
    partition = build_partition(corpus, read_topic_assignments(args.topics), emb)
    embedder = _embedder(args)
    if args.routes:
        classifier = LookupClassifier(read_topic_assignments(args.routes))
    else:
        classifier = CentroidClassifier(partition)
    if args.variants:
        variants = read_variants(args.variants)
    else:
        client = _client(args)
        variants = {q: generate_variants(client, q, t, args.n_variants)
                    for q, t in read_queries(args.queries).items()}
    runs = _per_query(lambda q, _t: route_and_search(partition, variants[q], classifier, embedder, args.k),
                      {q: "" for q in variants}, args.jobs)
    write_run(args.out, runs, tag=args.tag or "topic")
    return 0


def cmd_fuse(args) -> int:
    sources = {}
    for spec in args.run:
        name, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--run expects NAME=PATH, got {spec!r}")
        sources[name] = read_run(path)
    order = tuple(args.order.split(","))
    caps = dict(zip(order, _ints(args.caps))) if args.caps else {}
    config = FusionConfig(order, caps, args.output_cap)
    qids = sorted(set().union(*(set(r) for r in sources.values())))
    runs = []
    for qid in qids:
        lists = {n: r[qid] for n, r in sources.items() if qid in r}
        runs.append(round_robin_merge(lists, config))
    write_run(args.out, runs, tag=args.tag or "hybrid")
    return 0


def cmd_ltr_sample(args) -> int:
    queries = read_queries(args.queries)
    qrels = read_qrels(args.qrels)
    ctx = _context(args, queries)
    qids = sorted(q for q in queries if q in qrels)
    groups = sample_training_set(qids, qrels, ctx, SamplingPlan(seed=args.seed))
    write_groups(args.out, groups)
    print(f"{len(groups)} groups, {sum(len(g) for g in groups)} rows -> {args.out}")
    return 0


def cmd_ltr_train(args) -> int:
    groups = read_groups(args.groups)
    if args.valid:
        train, valid = groups, read_groups(args.valid)
    else:
        train, valid = split_groups(groups, args.train_fraction, args.seed)
    params = LambdaMartParams(**json.loads(args.params)) if args.params else LambdaMartParams()
    model = train_lambdamart(train, params, args.rounds, valid, args.seed)
    model.save(args.out)
    last = model.history[-1]
    print(" ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in last.items()))
    return 0


def cmd_ltr_rerank(args) -> int:
    queries = read_queries(args.queries)
    model = GbmModel.load(args.model)
    ctx = _context(args, queries)
    cands = read_run(args.run)
    runs = _per_query(lambda q, _t: predict_and_rerank(model, cands[q].head(args.depth), ctx),
                      {q: "" for q in cands}, args.jobs)
    write_run(args.out, runs, tag=args.tag or "ltr")
    return 0


def cmd_ltr_search(args) -> int:
    groups = read_groups(args.groups)
    train, valid = split_groups(groups, args.train_fraction, args.seed)
    space = GRID_SPACE if args.mode == "grid" else RANDOM_SPACE
    if args.dry_run:
        points = enumerate_space(space, args.mode, args.trials, args.seed)
        print(f"{len(points)} configurations")
        return 0
    results = hyperparameter_search(train, valid, args.mode, space, args.trials, args.seed, args.rounds)
    cols = list(results[0].as_row())
    lines = ["rank\t" + "\t".join(cols)]
    lines += [f"{i}\t" + "\t".join(str(r.as_row()[c]) for c in cols)
              for i, r in enumerate(results, start=1)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_rerank_llm(args) -> int:
    corpus = ingest_corpus(args.corpus)
    queries = read_queries(args.queries)
    client = _client(args)
    window = RerankWindow(args.window, args.stride, args.context)
    cands = read_run(args.run)

    def one(qid: str, _t: str) -> RankedList:
        head = listwise_rerank(client, queries[qid], cands[qid].head(args.depth), window, corpus)
        return RankedList.from_order(qid, head.doc_ids + cands[qid].doc_ids[args.depth:],
                                     "llm_rerank", head.metadata)

    runs = _per_query(one, {q: "" for q in cands if len(cands[q])}, args.jobs)
    write_run(args.out, runs, tag=args.tag or "llm_rerank")
    return 0


def cmd_synth_sample(args) -> int:
    ids = sample_entities(ingest_corpus(args.corpus), SamplingRules(seed=args.seed))
    Path(args.out).write_text("".join(f"{d}\n" for d in ids), encoding="utf-8")
    print(f"sampled {len(ids)} entities -> {args.out}")
    return 0


def cmd_synth_generate(args) -> int:
    corpus = ingest_corpus(args.corpus)
    ids = Path(args.ids).read_text(encoding="utf-8").split()
    records = generate_queries(_client(args), corpus, ids, args.model_tag)
    write_records(args.out, records)
    return 0


def cmd_synth_split(args) -> int:
    proportions = tuple(float(x) for x in args.proportions.split(","))
    records = split_dataset(read_records(args.records), proportions, args.seed)
    write_records(args.out, records)
    counts = {s: sum(r.split == s for r in records) for s in ("train", "dev", "test")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def cmd_eval(args) -> int:
    rep = evaluate(read_run(args.run), read_qrels(args.qrels), _ints(args.k), args.gain)
    if args.tsv:
        Path(args.tsv).write_text(rep.to_tsv(), encoding="utf-8")
    means = rep.mean()
    for name, value in means.items():
        print(f"{name}\t{value:.4f}")
    print(f"queries\t{rep.query_count}")
    print(f"skipped\t{len(rep.skipped)}")
    if args.by_prefix:
        for prefix, row in group_by_prefix(rep).items():
            print(prefix + "\t" + "\t".join(f"{k}={v:.4f}" for k, v in row.items()))
    return 0


def cmd_report(args) -> int:
    sys.stdout.write(report(args.run, args.qrels))
    return 0


def cmd_pipeline_run(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.jobs_given:
        cfg.jobs = args.jobs
    result = run_pipeline(cfg)
    print(f"{result.run_path}\t{result.tag}")
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def global_opts(p, default):
        # defaults live on the top-level parser only, so the flags work on
        # either side of the subcommand
        d = (lambda v: v) if default else (lambda v: argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=d(0))
        p.add_argument("--jobs", type=int, default=d(None), help="worker threads (default 1)")
        p.add_argument("--journal", default=d(None), help="LLM request journal (JSONL)")
        p.add_argument("--llm-mode", choices=("mock", "replay", "remote"), default=d("mock"))
        p.add_argument("--llm-responder", choices=sorted(RESPONDERS), default=d("identity"))
        p.add_argument("--llm-base-url", default=d(None))
        p.add_argument("--llm-model", default=d(None))
        p.add_argument("-v", "--verbose", action="count", default=d(0))

    parser = argparse.ArgumentParser(prog="totsearch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    global_opts(parser, True)
    shared = argparse.ArgumentParser(add_help=False)
    global_opts(shared, False)
    sub = parser.add_subparsers(dest="command", required=True)

    def leaf(parent, name, fn, help_text, aliases=()):
        p = parent.add_parser(name, help=help_text, aliases=list(aliases), parents=[shared])
        p.set_defaults(func=fn)
        return p

    def hashing_opts(p):
        p.add_argument("--dim", type=int, default=256)
        p.add_argument("--synonyms", help="JSON map applied before hashing")
        p.add_argument("--vocabulary", help="whitespace-separated known words")

    def feature_opts(p):
        p.add_argument("--queries", required=True)
        p.add_argument("--corpus", required=True)
        p.add_argument("--dense-run", required=True)
        p.add_argument("--sparse-run", required=True)
        p.add_argument("--pagerank", required=True)

    p = leaf(sub, "ingest", cmd_ingest, "validate a corpus and print statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", default="jsonl")
    p.add_argument("--out", help="write the normalized corpus here")

    idx = sub.add_parser("index", help="build retrieval indexes").add_subparsers(dest="kind", required=True)
    p = leaf(idx, "sparse", cmd_index_sparse, "BM25 inverted index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p = leaf(idx, "dense", cmd_index_dense, "embed the corpus with the hashing encoder")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--granularity", choices=("article", "paragraph"), default="article")
    p.add_argument("--chunk-size", type=int, default=512)
    p.add_argument("--overlap", type=int, default=128)
    hashing_opts(p)

    gr = sub.add_parser("graph", help="composite link graph").add_subparsers(dest="kind", required=True)
    p = leaf(gr, "build", cmd_graph_build, "combine direct, meta-path and k-NN edges")
    p.add_argument("--corpus", required=True)
    p.add_argument("--direct")
    p.add_argument("--meta")
    p.add_argument("--embeddings")
    p.add_argument("--alphas", default="1.0,0.5,0.25")
    p.add_argument("--knn-k", type=int, default=15)
    p.add_argument("--binary-meta", action="store_true", help="count each meta-path pair once")
    p.add_argument("--out", required=True)
    p = leaf(gr, "pagerank", cmd_graph_pagerank, "power-iteration PageRank")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-10)

    for name in ("retrieve", "search"):
        rt = sub.add_parser(name, help="first-stage retrieval" if name == "retrieve"
                            else "alias of retrieve").add_subparsers(dest="kind", required=True)
        p = leaf(rt, "sparse", cmd_retrieve_sparse, "BM25")
        p.add_argument("--index", required=True)
        p = leaf(rt, "dense", cmd_retrieve_dense, "exact inner-product search")
        p.add_argument("--embeddings", required=True)
        p.add_argument("--query-embeddings")
        p.add_argument("--pool-factor", type=int, default=4,
                       help="paragraph hits fetched per requested article")
        hashing_opts(p)
        p = leaf(rt, "llm", cmd_retrieve_llm, "LLM title generation resolved against the corpus")
        p.add_argument("--corpus", required=True)
        p.add_argument("--max-titles", type=int, default=20)
        p = leaf(rt, "topic", cmd_retrieve_topic, "query variants routed to per-topic indexes")
        p.add_argument("--corpus", required=True)
        p.add_argument("--embeddings", required=True)
        p.add_argument("--topics", required=True, help="doc_id<TAB>topic")
        p.add_argument("--variants", help="JSONL variant sets; generated by the LLM if absent")
        p.add_argument("--routes", help="text<TAB>topic lookup instead of the centroid classifier")
        p.add_argument("--n-variants", type=int, default=5)
        hashing_opts(p)
        for kind in ("sparse", "dense", "llm", "topic"):
            q = rt.choices[kind]
            q.add_argument("--queries", required=kind != "topic")
            if kind == "topic":
                q.add_argument("--k", "--k-per-variant", dest="k", type=int, default=1000)
            else:
                q.add_argument("--k", type=int, default=1000)
            q.add_argument("--out", required=True)
            q.add_argument("--tag", "--run-tag", dest="tag")

    p = leaf(sub, "fuse", cmd_fuse, "round-robin merge of runs")
    p.add_argument("--run", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--order", default="llm,dense,sparse")
    p.add_argument("--caps", help="comma-separated, aligned with --order")
    p.add_argument("--output-cap", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--tag")

    lt = sub.add_parser("ltr", help="LambdaMART reranking").add_subparsers(dest="kind", required=True)
    p = leaf(lt, "sample", cmd_ltr_sample, "labelled training groups from dense and sparse runs")
    feature_opts(p)
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True)
    p = leaf(lt, "train", cmd_ltr_train, "fit a model")
    p.add_argument("--groups", required=True)
    p.add_argument("--valid", help="validation groups; otherwise split --groups")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--params", help="JSON overrides of the default parameters")
    p.add_argument("--out", required=True)
    p = leaf(lt, "rerank", cmd_ltr_rerank, "rescore a candidate run")
    feature_opts(p)
    p.add_argument("--model", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--tag")
    p = leaf(lt, "search", cmd_ltr_search, "grid or random hyper-parameter search")
    p.add_argument("--groups", required=True)
    p.add_argument("--mode", choices=("grid", "random"), default="grid")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--dry-run", action="store_true", help="only count configurations")
    p.add_argument("--out")

    rr = sub.add_parser("rerank", help="LLM reranking").add_subparsers(dest="kind", required=True)
    p = leaf(rr, "llm", cmd_rerank_llm, "sliding-window listwise reranking")
    p.add_argument("--run", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--context", default="full_1500")
    p.add_argument("--depth", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--tag")

    sy = sub.add_parser("synth", help="synthetic query data").add_subparsers(dest="kind", required=True)
    p = leaf(sy, "sample", cmd_synth_sample, "pick entities by popularity tier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p = leaf(sy, "generate", cmd_synth_generate, "one LLM-written query per entity")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ids", required=True)
    p.add_argument("--model-tag")
    p.add_argument("--out", required=True)
    p = leaf(sy, "split", cmd_synth_split, "train/dev/test split")
    p.add_argument("--records", required=True)
    p.add_argument("--proportions", default="0.75,0.15,0.10")
    p.add_argument("--out", required=True)

    p = leaf(sub, "eval", cmd_eval, "metrics for one run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", default="10,100,1000")
    p.add_argument("--gain", choices=("exponential", "linear"), default="exponential")
    p.add_argument("--tsv", help="write per-query metrics here")
    p.add_argument("--by-prefix", action="store_true", help="also group by query-id prefix")

    p = leaf(sub, "report", cmd_report, "comparison table over several runs")
    p.add_argument("--run", nargs="+", required=True)
    p.add_argument("--qrels", required=True)

    pl = sub.add_parser("pipeline", help="config-driven end-to-end runs").add_subparsers(dest="kind", required=True)
    p = leaf(pl, "run", cmd_pipeline_run, "execute a pipeline config")
    p.add_argument("--config", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    args.jobs_given = args.jobs is not None
    if args.jobs is None:
        args.jobs = 1
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
