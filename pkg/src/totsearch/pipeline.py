"""Config-driven batch pipeline: retrieve, fuse, LTR rerank, LLM rerank.

A config is a JSON object. Paths are resolved relative to the config file.
Every referenced file is checked before any retrieval work starts.

.. code-block:: json

    {
      "name": "hybrid-ltr",
      "corpus": "corpus.jsonl",
      "queries": "queries.tsv",
      "qrels": "qrels.txt",
      "output": "runs/hybrid-ltr.run",
      "seed": 0,
      "jobs": 4,
      "retrieve": {
        "sparse": {"k": 500, "k1": 1.2, "b": 0.75},
        "dense": {"k": 500, "embeddings": "docs.temb",
                  "query_embeddings": "queries.temb"},
        "llm": {"max_titles": 20}
      },
      "fuse": {"order": ["llm", "dense", "sparse"],
               "caps": {"llm": 20, "dense": 500, "sparse": 500}},
      "ltr": {"model": "model.json", "pagerank": "pagerank.tsv"},
      "llm_rerank": {"depth": 100, "window": 20, "stride": 10, "context": "full_1500"},
      "llm": {"mode": "replay", "journal": "journal.jsonl"}
    }

Stages are optional except ``retrieve``. With ``dense`` but no
``query_embeddings``, queries are embedded with a hashing encoder built from
``dense.embedder`` (``dim``, optional ``synonyms`` JSON and ``vocabulary``
word list); the same encoder embeds the corpus when ``embeddings`` is absent.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .corpus import Corpus, ingest_corpus
from .dense import EmbeddingMatrix, HashingEmbedder, dense_search, embed_corpus, load_embeddings
from .evaluation import evaluate, read_qrels, read_run, write_run
from .fusion import FusionConfig, round_robin_merge
from .graph import read_pagerank
from .llm.client import Endpoint, LlmClient, identity_responder, reverse_responder
from .llm.rerank import RerankWindow, listwise_rerank
from .llm.retrieval import llm_retrieve, titles_to_ranked_list
from .ltr.features import FeatureContext
from .ltr.lambdamart import GbmModel
from .ltr.rerank import predict_and_rerank
from .ranking import RankedList, RetrievalWarning
from .sparse import SparseIndex, bm25_search, build_sparse

logger = logging.getLogger(__name__)

RESPONDERS = {"identity": identity_responder, "reverse": reverse_responder}
RETRIEVERS = ("sparse", "dense", "llm")
_TRANSPORT_KEYS = ("mode", "journal", "responder", "min_interval", "timeout", "retries", "token_env")


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, query_id: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed on query {query_id!r}: {cause}")
        self.stage = stage
        self.query_id = query_id


def read_queries(path: str | Path) -> dict[str, str]:
    """``qid<TAB>text`` lines, or JSONL objects with ``query_id`` and ``query``."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("{"):
                obj = json.loads(line)
                qid, text = str(obj["query_id"]), obj["query"]
            else:
                if "\t" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'qid<TAB>query'")
                qid, text = line.split("\t", 1)
            if qid in out:
                raise ValueError(f"{path}:{lineno}: duplicate query id {qid!r}")
            out[qid] = text
    return out


@dataclass
class PipelineConfig:
    name: str
    corpus: Path
    queries: Path
    output: Path
    retrieve: dict[str, dict[str, Any]]
    qrels: Path | None = None
    seed: int = 0
    jobs: int = 1
    fuse: dict[str, Any] | None = None
    ltr: dict[str, Any] | None = None
    llm_rerank: dict[str, Any] | None = None
    llm: dict[str, Any] = field(default_factory=lambda: {"mode": "mock", "responder": "identity"})
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base: str | Path = ".") -> "PipelineConfig":
        base = Path(base)
        for key in ("name", "corpus", "queries", "output", "retrieve"):
            if key not in d:
                raise ConfigError(f"config is missing required key {key!r}")

        def p(v):
            return None if v is None else (base / v if not Path(v).is_absolute() else Path(v))

        retrieve = {k: dict(v or {}) for k, v in d["retrieve"].items()}
        for sub in ("dense",):
            if sub in retrieve:
                for key in ("embeddings", "query_embeddings"):
                    if key in retrieve[sub]:
                        retrieve[sub][key] = p(retrieve[sub][key])
                emb = dict(retrieve[sub].get("embedder", {}))
                for key in ("synonyms", "vocabulary"):
                    if key in emb:
                        emb[key] = p(emb[key])
                retrieve[sub]["embedder"] = emb
        ltr = dict(d["ltr"]) if d.get("ltr") else None
        if ltr:
            for key in ("model", "pagerank"):
                if key in ltr:
                    ltr[key] = p(ltr[key])
        llm = dict(d.get("llm") or {"mode": "mock", "responder": "identity"})
        if "journal" in llm:
            llm["journal"] = p(llm["journal"])
        cfg = cls(name=str(d["name"]), corpus=p(d["corpus"]), queries=p(d["queries"]),
                  output=p(d["output"]), retrieve=retrieve, qrels=p(d.get("qrels")),
                  seed=int(d.get("seed", 0)), jobs=int(d.get("jobs", 1)),
                  fuse=d.get("fuse"), ltr=ltr, llm_rerank=d.get("llm_rerank"), llm=llm,
                  raw=json.loads(json.dumps(d)))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
        return cls.from_dict(d, path.parent)

    def validate(self) -> None:
        def must_exist(label: str, path: Path | None) -> None:
            if path is not None and not path.exists():
                raise ConfigError(f"{label} file not found: {path}")

        must_exist("corpus", self.corpus)
        must_exist("queries", self.queries)
        must_exist("qrels", self.qrels)
        if not self.retrieve:
            raise ConfigError("at least one retriever is required")
        unknown = set(self.retrieve) - set(RETRIEVERS)
        if unknown:
            raise ConfigError(f"unknown retrievers: {sorted(unknown)}")
        if len(self.retrieve) > 1 and self.fuse is None:
            raise ConfigError("several retrievers need a 'fuse' stage")
        dense = self.retrieve.get("dense")
        if dense:
            must_exist("dense embeddings", dense.get("embeddings"))
            must_exist("query embeddings", dense.get("query_embeddings"))
            must_exist("synonyms", dense["embedder"].get("synonyms"))
            must_exist("vocabulary", dense["embedder"].get("vocabulary"))
        if self.ltr is not None:
            for key in ("model", "pagerank"):
                if key not in self.ltr:
                    raise ConfigError(f"ltr stage needs {key!r}")
                must_exist(f"ltr {key}", self.ltr[key])
            if not {"dense", "sparse"} <= set(self.retrieve):
                raise ConfigError("ltr features need both dense and sparse retrieval")
        if self.needs_llm:
            mode = self.llm.get("mode", "mock")
            if mode == "replay":
                if "journal" not in self.llm:
                    raise ConfigError("replay mode needs a journal")
                must_exist("journal", self.llm["journal"])
            elif mode == "mock":
                if self.llm.get("responder", "identity") not in RESPONDERS:
                    raise ConfigError(f"unknown mock responder {self.llm.get('responder')!r}")
            elif mode == "remote":
                for key in ("base_url", "model"):
                    if key not in self.llm:
                        raise ConfigError(f"remote LLM needs {key!r}")
            else:
                raise ConfigError(f"unknown LLM mode {mode!r}")
        if self.llm_rerank is not None:
            w = self.llm_rerank
            RerankWindow(int(w.get("window", 20)), int(w.get("stride", 10)),
                         w.get("context", "full_1500"))
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @property
    def needs_llm(self) -> bool:
        return "llm" in self.retrieve or self.llm_rerank is not None

    def digest(self) -> str:
        """Hash of everything that can change the run file.

        How LLM answers are obtained (live, mock, or replayed from a journal)
        is left out, so a replay carries the same tag as the recorded run.
        """
        keep = {k: v for k, v in self.raw.items() if k not in ("output", "jobs")}
        if "llm" in keep:
            keep["llm"] = {k: v for k, v in keep["llm"].items() if k not in _TRANSPORT_KEYS}
        return hashlib.sha256(json.dumps(keep, sort_keys=True).encode("utf-8")).hexdigest()[:8]

    @property
    def tag(self) -> str:
        return f"{self.name}-{self.digest()}"


def _make_client(cfg: PipelineConfig) -> LlmClient | None:
    if not cfg.needs_llm:
        return None
    llm = cfg.llm
    mode = llm.get("mode", "mock")
    if mode == "replay":
        return LlmClient.replay(llm["journal"])
    if mode == "mock":
        return LlmClient.mock(RESPONDERS[llm.get("responder", "identity")],
                              journal=llm.get("journal"))
    ep = Endpoint(llm["base_url"], llm["model"], token_env=llm.get("token_env", "OPENAI_API_KEY"),
                  timeout=float(llm.get("timeout", 60.0)), retries=int(llm.get("retries", 3)))
    return LlmClient.remote(ep, journal=llm.get("journal"),
                            min_interval=float(llm.get("min_interval", 0.0)))


def _dense_setup(spec: Mapping[str, Any], corpus: Corpus, queries: Mapping[str, str]):
    emb_cfg = spec["embedder"]
    synonyms = (json.loads(Path(emb_cfg["synonyms"]).read_text(encoding="utf-8"))
                if "synonyms" in emb_cfg else None)
    vocabulary = (Path(emb_cfg["vocabulary"]).read_text(encoding="utf-8").split()
                  if "vocabulary" in emb_cfg else None)
    embedder = HashingEmbedder(int(emb_cfg.get("dim", 256)), synonyms, vocabulary)
    if "embeddings" in spec:
        matrix = load_embeddings(spec["embeddings"], "article", known_ids=corpus.all_ids())
    else:
        matrix = embed_corpus(corpus, embedder, "article")
    if "query_embeddings" in spec:
        qm = load_embeddings(spec["query_embeddings"])
        qvecs = {qid: qm.row(qid) for qid in queries}
    else:
        qvecs = dict(zip(queries, embedder.embed(list(queries.values()))))
    return matrix, qvecs


@dataclass
class PipelineResult:
    runs: dict[str, RankedList]
    tag: str
    metadata: dict[str, Any]
    run_path: Path
    metadata_path: Path


def run_pipeline(config: PipelineConfig, client: LlmClient | None = None) -> PipelineResult:
    """Run every configured stage for every query and write the run file.

    ``client`` overrides the LLM described in the config (useful for custom
    mock responders). Per query, stages run strictly in order; queries run
    concurrently on ``config.jobs`` threads.
    """
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    corpus = ingest_corpus(config.corpus)
    queries = read_queries(config.queries)
    if client is None:
        client = _make_client(config)
    timings["load"] = time.perf_counter() - t0

    t = time.perf_counter()
    sparse_spec = config.retrieve.get("sparse")
    index: SparseIndex | None = None
    if sparse_spec is not None:
        index = build_sparse(corpus, float(sparse_spec.get("k1", 1.2)), float(sparse_spec.get("b", 0.75)))
    dense_spec = config.retrieve.get("dense")
    matrix: EmbeddingMatrix | None = None
    qvecs: dict[str, np.ndarray] = {}
    if dense_spec is not None:
        matrix, qvecs = _dense_setup(dense_spec, corpus, queries)
    model = GbmModel.load(config.ltr["model"]) if config.ltr else None
    pr = read_pagerank(config.ltr["pagerank"]) if config.ltr else None
    pageviews = {d.doc_id: d.pageviews for d in corpus}
    timings["index"] = time.perf_counter() - t

    fuse = config.fuse or {}
    fusion = FusionConfig(tuple(fuse.get("order", ("llm", "dense", "sparse"))),
                          dict(fuse.get("caps", {})), fuse.get("output_cap"))
    window = None
    if config.llm_rerank is not None:
        w = config.llm_rerank
        window = RerankWindow(int(w.get("window", 20)), int(w.get("stride", 10)),
                              w.get("context", "full_1500"))

    def one(qid: str) -> tuple[RankedList, dict[str, float]]:
        text = queries[qid]
        clock: dict[str, float] = {}
        stage = "retrieve"
        try:
            s = time.perf_counter()
            lists: dict[str, RankedList] = {}
            if index is not None:
                stage = "retrieve:sparse"
                lists["sparse"] = bm25_search(index, text, int(sparse_spec.get("k", 1000)), qid)
            if matrix is not None:
                stage = "retrieve:dense"
                lists["dense"] = dense_search(matrix, qvecs[qid], int(dense_spec.get("k", 1000)), qid)
            if "llm" in config.retrieve:
                stage = "retrieve:llm"
                cands = llm_retrieve(client, text, int(config.retrieve["llm"].get("max_titles", 20)))
                lists["llm"] = titles_to_ranked_list(cands, corpus, qid)
            clock["retrieve"] = time.perf_counter() - s
            s = time.perf_counter()
            stage = "fuse"
            if len(lists) > 1 or config.fuse is not None:
                ranked = round_robin_merge({k: v for k, v in lists.items() if k in fusion.source_order},
                                           fusion)
            else:
                ranked = next(iter(lists.values()))
            clock["fuse"] = time.perf_counter() - s
            if model is not None:
                s = time.perf_counter()
                stage = "ltr"
                ctx = FeatureContext({qid: text}, {qid: lists["dense"]}, {qid: lists["sparse"]},
                                     pageviews, pr)
                ranked = predict_and_rerank(model, ranked, ctx)
                clock["ltr"] = time.perf_counter() - s
            if window is not None:
                s = time.perf_counter()
                stage = "llm_rerank"
                depth = int(config.llm_rerank.get("depth", 100))
                if len(ranked):
                    head = listwise_rerank(client, text, ranked.head(depth), window, corpus)
                    tail = ranked.doc_ids[depth:]
                    ranked = RankedList.from_order(qid, head.doc_ids + tail, "llm_rerank",
                                                   head.metadata)
                clock["llm_rerank"] = time.perf_counter() - s
        except Exception as exc:
            raise PipelineError(stage, qid, exc) from exc
        return ranked, clock

    t = time.perf_counter()
    qids = sorted(queries)
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        results = list(pool.map(one, qids))
    timings["queries"] = time.perf_counter() - t
    stage_totals: dict[str, float] = {}
    for _, clock in results:
        for k, v in clock.items():
            stage_totals[k] = stage_totals.get(k, 0.0) + v

    runs = {qid: rl for qid, (rl, _) in zip(qids, results)}
    config.output.parent.mkdir(parents=True, exist_ok=True)
    write_run(config.output, runs.values(), tag=config.tag)
    meta = {
        "tag": config.tag,
        "config": config.raw,
        "seed": config.seed,
        "jobs": config.jobs,
        "caps": dict(fusion.caps),
        "versions": {"totsearch": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "llm": {"mode": client.mode if client else None, "calls": client.calls if client else 0},
        "timings": {**timings, "per_stage": stage_totals},
        "queries": len(runs),
    }
    meta_path = config.output.with_name(config.output.name + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str), encoding="utf-8")
    logger.info("wrote %s (%d queries) tag=%s", config.output, len(runs), config.tag)
    return PipelineResult(runs, config.tag, meta, config.output, meta_path)


REPORT_COLUMNS = ("R@10", "R@1000", "NDCG@1000")


def report(runs: Mapping[str, Mapping[str, RankedList]] | Sequence[str | Path],
           qrels: Mapping[str, Mapping[str, int]] | str | Path,
           columns: Sequence[str] = REPORT_COLUMNS) -> str:
    """One row per run with the end-to-end columns; skip warnings go in a footer."""
    if isinstance(qrels, (str, Path)):
        qrels = read_qrels(qrels)
    if not isinstance(runs, Mapping):
        runs = {Path(p).name: read_run(p) for p in runs}
    if not runs:
        raise ValueError("report needs at least one run")
    ks = sorted({int(c.split("@")[1]) for c in columns if "@" in c})
    width = max(len("run"), *(len(n) for n in runs))
    lines = [f"{'run':<{width}}  " + "  ".join(f"{c:>9}" for c in columns)]
    footer = []
    for name, run in runs.items():
        # the summary warning is replaced by one footer line per skipped query
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RetrievalWarning)
            rep = evaluate(run, qrels, ks=ks)
        means = rep.mean()
        lines.append(f"{name:<{width}}  " + "  ".join(f"{means.get(c, 0.0):>9.4f}" for c in columns))
        for qid in rep.skipped:
            footer.append(f"{name}: query {qid!r} has no relevant judgments; skipped")
    if footer:
        lines.append("")
        lines.append("warnings:")
        lines.extend(f"  {m}" for m in footer)
    return "\n".join(lines) + "\n"
