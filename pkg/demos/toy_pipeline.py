"""Walk a small synthetic collection through both retrieval stages.

Run with ``python demos/toy_pipeline.py``; finishes in a few seconds.
"""

import warnings

import numpy as np

from totsearch.dense import dense_search, embed_corpus
from totsearch.evaluation import ndcg_at_k, recall_at_k
from totsearch.fusion import assemble_hybrid
from totsearch.graph import build_composite, pagerank
from totsearch.llm import LlmClient, RerankWindow, listwise_rerank, llm_retrieve, titles_to_ranked_list
from totsearch.ltr import FeatureContext, LambdaMartParams, predict_and_rerank, sample_training_set, train_lambdamart
from totsearch.ranking import RetrievalWarning
from totsearch.sparse import bm25_search, build_sparse
from totsearch.toy import make_collection

warnings.simplefilter("ignore", RetrievalWarning)

# 500 documents, 10 queries of each kind plus 40 vague ones
col = make_collection(n_docs=500, queries_per_kind={"lexical": 10, "semantic": 10, "famous": 10, "vague": 40})
qrels = col.qrels()
print(len(col.corpus), "documents,", len(col.queries), "queries")

index = build_sparse(col.corpus)
vectors = embed_corpus(col.corpus, col.embedder)
client = LlmClient.mock(col.knowledge_responder())

runs = {name: {} for name in ("sparse", "dense", "llm", "hybrid")}
for q in col.queries:
    runs["sparse"][q.query_id] = bm25_search(index, q.text, 100, q.query_id)
    runs["dense"][q.query_id] = dense_search(vectors, col.embedder.embed_one(q.text), 100, q.query_id)
    runs["llm"][q.query_id] = titles_to_ranked_list(llm_retrieve(client, q.text), col.corpus, q.query_id)
    runs["hybrid"][q.query_id] = assemble_hybrid(runs["llm"][q.query_id], runs["dense"][q.query_id],
                                                 runs["sparse"][q.query_id], caps=(20, 50, 50), output_cap=100)

# each retriever is good at one kind of query; the fused list covers all of them
print("\nrecall@100 by query kind")
print(f"{'':10s}" + "".join(f"{k:>10s}" for k in runs))
for kind in ("lexical", "semantic", "famous", "vague"):
    ids = [q.query_id for q in col.select(kind)]
    row = [np.mean([recall_at_k(runs[m][i], qrels, 100) for i in ids]) for m in runs]
    print(f"{kind:10s}" + "".join(f"{v:10.2f}" for v in row))

# popularity features come from pageviews and PageRank over the link graph
pr = pagerank(build_composite(col.corpus.all_ids(), col.direct_edges, col.meta_edges, vectors))
ctx = FeatureContext({q.query_id: q.text for q in col.queries}, runs["dense"], runs["sparse"],
                     {d.doc_id: d.pageviews for d in col.corpus}, pr.scores)

vague = [q.query_id for q in col.select("vague")]
train, test = vague[:30], vague[30:]
model = train_lambdamart(sample_training_set(train, qrels, ctx), LambdaMartParams(), 100)

print("\nheld-out vague queries, ndcg@10")
before = np.mean([ndcg_at_k(runs["sparse"][q], qrels, 10) for q in test])
after = np.mean([ndcg_at_k(predict_and_rerank(model, runs["sparse"][q], ctx), qrels, 10) for q in test])
print(f"  BM25 order       {before:.3f}")
print(f"  LambdaMART order {after:.3f}")

# the mock reranker knows which documents carry each query's answer tokens
print("\nlistwise rerank of the hybrid top-30, mean ndcg@10 over all queries")
reranked = {q: listwise_rerank(client, col.query_texts()[q], run.head(30), RerankWindow(), col.corpus)
            for q, run in runs["hybrid"].items()}
print(f"  hybrid   {np.mean([ndcg_at_k(r, qrels, 10) for r in runs['hybrid'].values()]):.3f}")
print(f"  reranked {np.mean([ndcg_at_k(r, qrels, 10) for r in reranked.values()]):.3f}")
print("LLM calls made:", client.calls)
