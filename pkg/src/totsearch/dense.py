"""Exact flat vector search over precomputed embeddings.

Embedding file layout (little-endian)::

    magic     4s   b"TEMB"
    version   u16  1
    dim       u32
    count     u32
    gran      u8   0 = paragraph, 1 = article
    normed    u8   1 if rows are unit length
    then ``count`` records of
    id_len    u16, id utf-8 bytes, n_values u32, float32[n_values]

``n_values`` must equal ``dim``; it is stored per record so that a
short or long row is reported instead of silently misaligning the file.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .ranking import RankedList, RetrievalWarning
from .sparse import tokenize

logger = logging.getLogger(__name__)

MAGIC = b"TEMB"
VERSION = 1
_HEADER = struct.Struct("<4sHIIBB")
_GRANULARITY = {"paragraph": 0, "article": 1}


class EmbeddingFormatError(ValueError):
    pass


class DimensionMismatch(EmbeddingFormatError):
    pass


class DegenerateAverageError(ValueError):
    pass


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    vectors: np.ndarray
    granularity: str = "article"
    normalized: bool = False

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise DimensionMismatch("vectors must be a 2-d array")
        if len(self.ids) != self.vectors.shape[0]:
            raise DimensionMismatch(f"{len(self.ids)} ids for {self.vectors.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingFormatError("duplicate ids in embedding matrix")
        if self.granularity not in _GRANULARITY:
            raise EmbeddingFormatError(f"unknown granularity {self.granularity!r}")
        if self.normalized and len(self.ids):
            norms = np.linalg.norm(self.vectors, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise EmbeddingFormatError("rows flagged normalized are not unit length")
        # rank of each id in lexicographic order, used for tie-breaking
        order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        self._id_rank[order] = np.arange(len(self.ids))
        self._row = {d: i for i, d in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, doc_id: str) -> np.ndarray:
        return self.vectors[self._row[doc_id]]

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._row

    def subset(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        rows = [self._row[i] for i in ids]
        return EmbeddingMatrix(
            list(ids), self.vectors[rows].reshape(len(rows), self.dim),
            self.granularity, self.normalized,
        )

    def normalize(self) -> "EmbeddingMatrix":
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise DegenerateAverageError("cannot normalize a zero vector")
        return EmbeddingMatrix(list(self.ids), self.vectors / norms, self.granularity, True)

    def top_k(self, scores: np.ndarray, k: int) -> np.ndarray:
        """Row indices of the ``k`` best scores, ties by id ascending."""
        order = np.lexsort((self._id_rank, -scores))
        return order[:k]


def write_embeddings(path: str | Path, matrix: EmbeddingMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, matrix.dim, len(matrix),
                              _GRANULARITY[matrix.granularity], int(matrix.normalized)))
        data = matrix.vectors.astype("<f4")
        for doc_id, vec in zip(matrix.ids, data):
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", vec.shape[0]))
            fh.write(vec.tobytes())


def load_embeddings(
    path: str | Path,
    granularity: str | None = None,
    known_ids: Iterable[str] | None = None,
    strict: bool = False,
) -> EmbeddingMatrix:
    """Read an embedding file.

    If ``known_ids`` is given, rows whose id is not in it are counted and
    reported with a warning (or rejected when ``strict``).
    """
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise EmbeddingFormatError(f"{path}: truncated header")
    magic, version, dim, count, gran, normed = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    gran_name = {v: k for k, v in _GRANULARITY.items()}.get(gran)
    if gran_name is None:
        raise EmbeddingFormatError(f"{path}: unknown granularity code {gran}")
    if granularity is not None and granularity != gran_name:
        raise EmbeddingFormatError(f"{path}: file holds {gran_name} vectors, not {granularity}")

    ids: list[str] = []
    vectors = np.empty((count, dim), dtype=np.float32)
    off = _HEADER.size
    try:
        for i in range(count):
            (id_len,) = struct.unpack_from("<H", buf, off)
            off += 2
            ids.append(buf[off:off + id_len].decode("utf-8"))
            off += id_len
            (n_values,) = struct.unpack_from("<I", buf, off)
            off += 4
            if n_values != dim:
                raise DimensionMismatch(
                    f"{path}: record {i} ({ids[-1]!r}) has {n_values} values, declared dim {dim}")
            end = off + 4 * dim
            if end > len(buf):
                raise EmbeddingFormatError(f"{path}: truncated at record {i}")
            vectors[i] = np.frombuffer(buf, dtype="<f4", count=dim, offset=off)
            off = end
    except struct.error as exc:
        raise EmbeddingFormatError(f"{path}: truncated at record {len(ids)}") from exc
    if off != len(buf):
        raise EmbeddingFormatError(f"{path}: {len(buf) - off} trailing bytes")

    if known_ids is not None:
        known = set(known_ids)
        unknown = [d for d in ids if d not in known]
        if unknown:
            if strict:
                raise EmbeddingFormatError(f"{path}: {len(unknown)} ids not in corpus, e.g. {unknown[0]!r}")
            warnings.warn(f"{path}: {len(unknown)} embedding ids not in corpus", RetrievalWarning)
    # float32 -> float64 is exact, so write/load round-trips bit for bit
    return EmbeddingMatrix(ids, vectors.astype(np.float64), gran_name, bool(normed))


def dense_search(matrix: EmbeddingMatrix, query_vec, k: int, query_id: str = "",
                 provenance: str = "dense") -> RankedList:
    """Exact top-k by dot product; ties broken by id."""
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (matrix.dim,):
        raise DimensionMismatch(f"query has shape {q.shape}, index dim is {matrix.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(matrix) == 0:
        return RankedList(query_id, [], provenance)
    scores = matrix.vectors @ q
    rows = matrix.top_k(scores, k)
    return RankedList.from_scores(
        query_id, [(matrix.ids[r], float(scores[r])) for r in rows], provenance)


def max_pool_to_articles(paragraph_list: RankedList, paragraph_to_article: Mapping[str, str]) -> RankedList:
    best: dict[str, float] = {}
    for e in paragraph_list:
        try:
            article = paragraph_to_article[e.doc_id]
        except KeyError:
            raise KeyError(f"paragraph {e.doc_id!r} has no article mapping") from None
        if article not in best or e.score > best[article]:
            best[article] = e.score
    return RankedList.from_scores(paragraph_list.query_id, best.items(), "dense")


def paragraph_id(doc_id: str, index: int) -> str:
    return f"{doc_id}#{index}"


class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic stand-in for a sentence encoder.

    Tokens are hashed into signed buckets and the bag is L2-normalized.
    ``synonyms`` canonicalizes tokens before hashing; when ``vocabulary`` is
    set, tokens outside it are ignored (an encoder that never saw them).
    """

    def __init__(self, dim: int = 64, synonyms: Mapping[str, str] | None = None,
                 vocabulary: Iterable[str] | None = None):
        self.dim = dim
        self.synonyms = dict(synonyms or {})
        self.vocabulary = None if vocabulary is None else frozenset(vocabulary)
        self._cache: dict[str, tuple[int, float]] = {}

    def _bucket(self, token: str) -> tuple[int, float]:
        hit = self._cache.get(token)
        if hit is None:
            h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            v = int.from_bytes(h, "little")
            hit = (v % self.dim, 1.0 if (v >> 63) & 1 else -1.0)
            self._cache[token] = hit
        return hit

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for tok in tokenize(text):
            tok = self.synonyms.get(tok, tok)
            if self.vocabulary is not None and tok not in self.vocabulary:
                continue
            idx, sign = self._bucket(tok)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.vstack([self.embed_one(t) for t in texts]) if texts else np.zeros((0, self.dim))


class LookupEmbedder:
    """Serves precomputed vectors (e.g. query embeddings) keyed by text or id."""

    def __init__(self, table: Mapping[str, np.ndarray], dim: int):
        self.table = dict(table)
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        missing = [t for t in texts if t not in self.table]
        if missing:
            raise KeyError(f"no precomputed embedding for {missing[0]!r}")
        return np.vstack([np.asarray(self.table[t], dtype=np.float64) for t in texts])


def chunk_tokens(tokens: Sequence[str], chunk_size: int, overlap: int) -> list[list[str]]:
    if not chunk_size > overlap >= 0:
        raise ValueError("need chunk_size > overlap >= 0")
    if len(tokens) <= chunk_size:
        return [list(tokens)]
    step = chunk_size - overlap
    chunks = []
    start = 0
    while True:
        chunks.append(list(tokens[start:start + chunk_size]))
        if start + chunk_size >= len(tokens):
            break
        start += step
    return chunks


def chunk_and_average(long_text: str, embedder: Embedder, chunk_size: int = 512,
                      overlap: int = 128) -> np.ndarray:
    """Embed overlapping whitespace-token windows and return their unit-length mean."""
    tokens = long_text.split()
    if not tokens:
        raise ValueError("cannot embed empty text")
    chunks = [" ".join(c) for c in chunk_tokens(tokens, chunk_size, overlap)]
    mean = np.asarray(embedder.embed(chunks), dtype=np.float64).mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise DegenerateAverageError("degenerate average: chunk embeddings cancel out")
    return mean / norm


def embed_corpus(corpus, embedder: Embedder, granularity: str = "article",
                 chunk_size: int = 512, overlap: int = 128) -> EmbeddingMatrix:
    """Article vectors via chunk averaging, or one vector per paragraph."""
    ids: list[str] = []
    rows: list[np.ndarray] = []
    for doc in corpus:
        if granularity == "article":
            try:
                rows.append(chunk_and_average(doc.text, embedder, chunk_size, overlap))
            except (ValueError, DegenerateAverageError) as exc:
                logger.warning("skipping %s: %s", doc.doc_id, exc)
                continue
            ids.append(doc.doc_id)
        else:
            for i, para in enumerate(doc.paragraphs):
                if not para.strip():
                    continue
                ids.append(paragraph_id(doc.doc_id, i))
                rows.append(np.asarray(embedder.embed([para])[0], dtype=np.float64))
    vectors = np.vstack(rows) if rows else np.zeros((0, embedder.dim))
    norms = np.linalg.norm(vectors, axis=1) if len(rows) else np.zeros(0)
    normalized = bool(len(rows)) and bool(np.all(np.abs(norms - 1.0) <= 1e-6))
    return EmbeddingMatrix(ids, vectors, granularity, normalized)
