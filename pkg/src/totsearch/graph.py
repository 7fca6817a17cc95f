"""Composite article graph (direct + meta-path + semantic kNN) and PageRank."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .dense import EmbeddingMatrix


class GraphError(ValueError):
    pass


@dataclass
class CompositeGraph:
    node_ids: list[str]
    weights: sp.csr_matrix
    alphas: tuple[float, float, float] = (1.0, 0.5, 0.25)
    knn_k: int = 15
    meta_counted: bool = True
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.index = {d: i for i, d in enumerate(self.node_ids)}
        if len(self.index) != len(self.node_ids):
            raise GraphError("duplicate node ids")
        n = len(self.node_ids)
        if self.weights.shape != (n, n):
            raise GraphError(f"weight matrix shape {self.weights.shape} for {n} nodes")

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def weight(self, u: str, v: str) -> float:
        return float(self.weights[self.index[u], self.index[v]])

    def edges(self) -> dict[tuple[str, str], float]:
        coo = self.weights.tocoo()
        return {
            (self.node_ids[i], self.node_ids[j]): float(w)
            for i, j, w in zip(coo.row, coo.col, coo.data) if w != 0
        }

    def save(self, path: str | Path) -> None:
        """``<path>`` as scipy npz plus ``<path>.json`` with ids and parameters."""
        path = _npz(path)
        sp.save_npz(path, self.weights)
        meta = {"node_ids": self.node_ids, "alphas": list(self.alphas),
                "knn_k": self.knn_k, "meta_counted": self.meta_counted}
        Path(str(path) + ".json").write_text(json.dumps(meta), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CompositeGraph":
        path = _npz(path)
        meta = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
        return cls(meta["node_ids"], sp.load_npz(path).tocsr(), tuple(meta["alphas"]),
                   meta["knn_k"], meta["meta_counted"])


def _npz(path: str | Path) -> str:
    path = str(path)
    return path if path.endswith(".npz") else path + ".npz"


def knn_neighbors(embeddings: EmbeddingMatrix, node_ids: Sequence[str], k: int,
                  block: int = 1024) -> list[np.ndarray]:
    """Cosine k-nearest neighbours (excluding self) for every node, as node indices.

    Ties at equal similarity go to the lexicographically smaller id.
    """
    missing = [d for d in node_ids if d not in embeddings]
    if missing:
        raise GraphError(f"no embedding for node {missing[0]!r}")
    X = np.vstack([embeddings.row(d) for d in node_ids])
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    X = X / np.where(norms == 0, 1.0, norms)
    order = sorted(range(len(node_ids)), key=node_ids.__getitem__)
    id_rank = np.empty(len(node_ids), dtype=np.int64)
    id_rank[order] = np.arange(len(node_ids))
    out = []
    for start in range(0, len(node_ids), block):
        sims = X[start:start + block] @ X.T
        for r, row in enumerate(sims):
            row = row.copy()
            row[start + r] = -np.inf
            out.append(np.lexsort((id_rank, -row))[:k])
    return out


def build_composite(
    node_ids: Sequence[str],
    direct_edges: Iterable[tuple[str, str]] = (),
    meta_edges: Iterable[tuple[str, str, str]] = (),
    embeddings: EmbeddingMatrix | None = None,
    alpha1: float = 1.0,
    alpha2: float = 0.5,
    alpha3: float = 0.25,
    knn_k: int = 15,
    meta_counted: bool = True,
) -> CompositeGraph:
    """W = alpha1*A_direct + alpha2*A_meta + alpha3*A_sem.

    ``meta_edges`` are ``(u, m, v)`` paths through a non-article node ``m``;
    with ``meta_counted`` each distinct intermediate adds one unit, otherwise
    the meta component is binary. Semantic edges run from each node to its
    ``knn_k`` cosine-nearest neighbours.
    """
    node_ids = list(node_ids)
    index = {d: i for i, d in enumerate(node_ids)}
    n = len(node_ids)

    def idx(d: str) -> int:
        try:
            return index[d]
        except KeyError:
            raise GraphError(f"unknown node id {d!r}") from None

    direct = {(idx(u), idx(v)) for u, v in direct_edges}
    meta_paths = {(idx(u), m, idx(v)) for u, m, v in meta_edges}
    meta = Counter((u, v) for u, _, v in meta_paths)
    if not meta_counted:
        meta = Counter(dict.fromkeys(meta, 1))

    sem: set[tuple[int, int]] = set()
    if embeddings is not None and knn_k > 0:
        if knn_k >= n:
            raise GraphError(f"knn_k={knn_k} must be smaller than node count {n}")
        for u, nbrs in enumerate(knn_neighbors(embeddings, node_ids, knn_k)):
            sem.update((u, int(v)) for v in nbrs)

    acc: dict[tuple[int, int], float] = {}
    for key in direct:
        acc[key] = acc.get(key, 0.0) + alpha1
    for key, count in meta.items():
        acc[key] = acc.get(key, 0.0) + alpha2 * count
    for key in sem:
        acc[key] = acc.get(key, 0.0) + alpha3
    if acc:
        rows, cols = zip(*acc)
        W = sp.csr_matrix((list(acc.values()), (rows, cols)), shape=(n, n))
    else:
        W = sp.csr_matrix((n, n))
    return CompositeGraph(node_ids, W, (alpha1, alpha2, alpha3), knn_k, meta_counted)


@dataclass
class PageRankVector:
    scores: dict[str, float]
    damping: float
    iterations_run: int
    residual: float
    converged: bool
    blocking: str = "single-block csr matvec"

    def as_array(self, node_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.scores[d] for d in node_ids])


def pagerank(graph: CompositeGraph, damping: float = 0.85, max_iter: int = 200,
             tol: float = 1e-10) -> PageRankVector:
    """Weighted PageRank by power iteration.

    Non-dangling rows follow ``damping * W_ij / sum_k W_ik + (1 - damping) / N``;
    dangling rows teleport uniformly. The dangling term is applied as a
    rank-one correction so ``W`` stays sparse. Stops once the L1 change
    between iterates drops below ``tol``.
    """
    n = graph.n
    if n < 1:
        raise GraphError("pagerank needs at least one node")
    W = graph.weights.tocsr().astype(np.float64)
    out_w = np.asarray(W.sum(axis=1)).ravel()
    dangling = out_w == 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / out_w[~dangling]
    # row-stochastic on non-dangling rows; transpose for x @ P as P.T @ x
    PT = (sp.diags(inv) @ W).T.tocsr()

    x = np.full(n, 1.0 / n)
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        live = x[~dangling].sum()
        nxt = damping * (PT @ x) + ((1.0 - damping) * live + x[dangling].sum()) / n
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - x).sum())
        x = nxt
        if residual < tol:
            break
    return PageRankVector(dict(zip(graph.node_ids, x.tolist())), damping, it, residual,
                          residual < tol)


def degree_stats(graph: CompositeGraph) -> dict[str, dict[str, float]]:
    """Mean / std / min / max of in- and out-degree over nonzero-weight edges."""
    A = graph.weights.tocsr().copy()
    A.eliminate_zeros()
    A.data[:] = 1.0
    out_deg = np.asarray(A.sum(axis=1)).ravel()
    in_deg = np.asarray(A.sum(axis=0)).ravel()

    def summary(d: np.ndarray) -> dict[str, float]:
        if d.size == 0:
            return {"mean": 0.0, "std": 0.0, "min": 0.0, "max": 0.0}
        return {"mean": float(d.mean()), "std": float(d.std()),
                "min": float(d.min()), "max": float(d.max())}

    return {"in": summary(in_deg), "out": summary(out_deg)}


def read_edges(path: str | Path, arity: int) -> list[tuple[str, ...]]:
    """TSV edge file: ``u<TAB>v`` (arity 2) or ``u<TAB>m<TAB>v`` (arity 3)."""
    edges = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != arity:
                raise GraphError(f"{path}:{lineno}: expected {arity} columns, got {len(row)}")
            edges.append(tuple(row))
    return edges


def write_pagerank(path: str | Path, pr: PageRankVector) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc_id, score in pr.scores.items():
            fh.write(f"{doc_id}\t{score!r}\n")


def read_pagerank(path: str | Path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected doc_id<TAB>score")
            out[parts[0]] = float(parts[1])
    return out
