"""Two-stage known-item retrieval: hybrid candidate generation, then LambdaMART
and listwise LLM reranking."""

__version__ = "0.1.0"

from .corpus import Corpus, Document, Stage, TitleResolution, ingest_corpus
from .ranking import Entry, RankedList, RetrievalWarning

__all__ = ["__version__", "Corpus", "Document", "Stage", "TitleResolution", "ingest_corpus",
           "Entry", "RankedList", "RetrievalWarning"]
