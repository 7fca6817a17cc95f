"""Route query variants to per-topic dense indexes and merge by max score."""

import logging

from totsearch.dense import embed_corpus
from totsearch.evaluation import recall_at_k
from totsearch.topics import CentroidClassifier, QueryVariantSet, build_partition, route_and_search
from totsearch.toy import make_collection

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

col = make_collection(n_docs=300, queries_per_kind={"semantic": 10}, seed=2)
vectors = embed_corpus(col.corpus, col.embedder)
partition = build_partition(col.corpus, col.topics, vectors)
print("topics:", partition.labels)
print("kept", len(partition.retained()), "of", len(col.corpus), "documents")
print("size per topic:", {t: len(ix) for t, ix in partition.indexes.items()})

classifier = CentroidClassifier(partition)
qrels = col.qrels()
for q in col.queries[:5]:
    words = q.text.split()
    # two extra phrasings: the first and second halves of the query
    variants = QueryVariantSet(q.query_id, q.text, (" ".join(words[:6]), " ".join(words[6:])))
    run = route_and_search(partition, variants, classifier, col.embedder, k_per_variant=50)
    print(f"{q.query_id}: routed to {run.metadata['routed_topics']}, "
          f"true topic {col.topics[q.golden]}, recall@50 {recall_at_k(run, qrels, 50):.0f}")
