"""Gradient-boosted regression trees trained with LambdaRank gradients."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import FEATURE_NAMES, LtrGroup

logger = logging.getLogger(__name__)

MODEL_FORMAT = "totsearch-lambdamart"
MODEL_VERSION = 1


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class LambdaMartParams:
    """Booster settings; defaults are the grid-search winner (v5)."""

    learning_rate: float = 0.2
    max_depth: int = 6
    min_child_weight: float = 5.0
    subsample: float = 1.0
    colsample: float = 1.0
    gamma: float = 0.0
    reg_lambda: float = 1.0
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_child_weight < 0 or self.gamma < 0 or self.reg_lambda < 0:
            raise ValueError("min_child_weight, gamma and reg_lambda must be >= 0")
        if not (0 < self.subsample <= 1 and 0 < self.colsample <= 1):
            raise ValueError("sampling ratios must be in (0, 1]")


@dataclass
class Tree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf; samples with
    ``x[feature] < threshold`` go left."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def depth(self) -> int:
        def walk(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0) if self.feature else 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = feat[node]
            inner = f >= 0
            if not inner.any():
                break
            go_left = X[rows[inner], f[inner]] < thr[node[inner]]
            node[inner] = np.where(go_left, left[node[inner]], right[node[inner]])
        return np.asarray(self.value)[node]


@dataclass
class GbmModel:
    trees: list[Tree] = field(default_factory=list)
    params: LambdaMartParams = field(default_factory=LambdaMartParams)
    feature_names: tuple[str, ...] = FEATURE_NAMES
    metadata: dict = field(default_factory=dict)
    history: list[dict[str, float]] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "metadata": self.metadata,
            "history": self.history,
            "trees": [asdict(t) for t in self.trees],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "GbmModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a LambdaMART model dump")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        return cls([Tree(**t) for t in d["trees"]], LambdaMartParams(**d["params"]),
                   tuple(d["feature_names"]), d.get("metadata", {}), d.get("history", []))

    @classmethod
    def load(cls, path: str | Path) -> "GbmModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- metric ----------------------------------------------------------------------

def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(n) + 2.0)


def group_ndcg(scores: np.ndarray, labels: np.ndarray) -> float:
    """NDCG over the whole group; ties in ``scores`` keep input order."""
    gains = 2.0 ** labels - 1.0
    ideal = np.sort(gains)[::-1] @ _discounts(len(gains))
    if ideal == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    return float(gains[order] @ _discounts(len(gains)) / ideal)


def mean_ndcg(model_scores: Sequence[np.ndarray], groups: Sequence[LtrGroup]) -> float:
    vals = [group_ndcg(s, g.labels) for s, g in zip(model_scores, groups) if g.labels.max() > 0]
    return float(np.mean(vals)) if vals else 0.0


# -- gradients -------------------------------------------------------------------

def lambda_gradients(scores: np.ndarray, labels: np.ndarray, sigma: float = 1.0):
    """First and second derivatives of the LambdaRank loss for one group.

    Every pair with ``label_i > label_j`` contributes a logistic pairwise
    loss weighted by the |NDCG change| from swapping i and j in the
    current ranking.
    """
    n = len(scores)
    grad = np.zeros(n)
    hess = np.zeros(n)
    gains = 2.0 ** labels - 1.0
    idcg = np.sort(gains)[::-1] @ _discounts(n)
    if n < 2 or idcg == 0:
        return grad, hess
    order = np.argsort(-scores, kind="stable")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    disc = _discounts(n)[pos]

    better = labels[:, None] > labels[None, :]
    delta = np.abs((gains[:, None] - gains[None, :]) * (disc[:, None] - disc[None, :])) / idcg
    diff = sigma * (scores[:, None] - scores[None, :])
    rho = 0.5 * (1.0 - np.tanh(0.5 * diff))  # 1 / (1 + exp(diff)), overflow-safe
    lam = np.where(better, sigma * rho * delta, 0.0)
    w = np.where(better, sigma * sigma * rho * (1.0 - rho) * delta, 0.0)
    grad = -lam.sum(axis=1) + lam.sum(axis=0)
    hess = w.sum(axis=1) + w.sum(axis=0)
    return grad, hess


# -- tree growing ----------------------------------------------------------------

def _best_split(X, grad, hess, idx, features, params: LambdaMartParams):
    G = grad[idx].sum()
    H = hess[idx].sum()
    lam = params.reg_lambda
    parent = G * G / (H + lam)
    best = (0.0, -1, 0.0)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        gl = np.cumsum(grad[idx][order])[:-1]
        hl = np.cumsum(hess[idx][order])[:-1]
        gr = G - gl
        hr = H - hl
        ok = (xs[:-1] < xs[1:]) & (hl >= params.min_child_weight) & (hr >= params.min_child_weight)
        if not ok.any():
            continue
        gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[0]:
            best = (float(gain[i]), int(f), float((xs[i] + xs[i + 1]) / 2.0))
    return best


def grow_tree(X: np.ndarray, grad: np.ndarray, hess: np.ndarray, rows: np.ndarray,
              features: Sequence[int], params: LambdaMartParams) -> Tree:
    """Exact greedy regression tree on second-order statistics."""
    tree = Tree()
    lam = params.reg_lambda

    def leaf_value(idx):
        return -params.learning_rate * grad[idx].sum() / (hess[idx].sum() + lam)

    def grow(idx: np.ndarray, depth: int) -> int:
        node = tree.add_leaf(float(leaf_value(idx)))
        if depth >= params.max_depth or len(idx) < 2:
            return node
        gain, f, thr = _best_split(X, grad, hess, idx, features, params)
        if f < 0 or gain - params.gamma <= 1e-12:
            return node
        mask = X[idx, f] < thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.gain[node] = gain
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.asarray(rows), 0)
    return tree


# -- training --------------------------------------------------------------------

def _stack(groups: Sequence[LtrGroup]):
    X = np.vstack([g.features for g in groups])
    bounds = np.cumsum([0] + [len(g) for g in groups])
    return X, bounds


def train_lambdamart(
    train_groups: Sequence[LtrGroup],
    params: LambdaMartParams = LambdaMartParams(),
    rounds: int = 100,
    valid_groups: Sequence[LtrGroup] = (),
    seed: int = 0,
) -> GbmModel:
    """Fit ``rounds`` trees; train/validation NDCG is recorded after each."""
    if not train_groups:
        raise DegenerateDataError("no training groups")
    if not any(len(np.unique(g.labels)) > 1 for g in train_groups):
        raise DegenerateDataError("every training group has a single label; nothing to rank")
    n_feat = train_groups[0].features.shape[1]
    X, bounds = _stack(train_groups)
    n = X.shape[0]
    scores = np.zeros(n)
    rng = np.random.default_rng(seed)
    model = GbmModel(params=params, feature_names=tuple(train_groups[0].feature_names))
    model.metadata.update({"seed": seed, "rounds": rounds, "objective": "lambdarank-ndcg",
                           "n_train_groups": len(train_groups),
                           "n_valid_groups": len(valid_groups)})
    valid_X = [g.features for g in valid_groups]
    valid_scores = [np.zeros(len(g)) for g in valid_groups]
    n_cols = max(1, int(round(params.colsample * n_feat)))
    n_rows = max(1, int(round(params.subsample * n)))

    for r in range(rounds):
        grad = np.zeros(n)
        hess = np.zeros(n)
        for grp, a, b in zip(train_groups, bounds[:-1], bounds[1:]):
            g, h = lambda_gradients(scores[a:b], grp.labels, params.sigma)
            grad[a:b] = g
            hess[a:b] = h
        rows = np.arange(n) if n_rows == n else np.sort(rng.choice(n, n_rows, replace=False))
        feats = list(range(n_feat)) if n_cols == n_feat else sorted(rng.choice(n_feat, n_cols, replace=False).tolist())
        tree = grow_tree(X, grad, hess, rows, feats, params)
        model.trees.append(tree)
        scores += tree.predict(X)
        for i, vx in enumerate(valid_X):
            valid_scores[i] += tree.predict(vx)
        entry = {"round": r + 1,
                 "train_ndcg": mean_ndcg([scores[a:b] for a, b in zip(bounds[:-1], bounds[1:])], train_groups)}
        if valid_groups:
            entry["valid_ndcg"] = mean_ndcg(valid_scores, valid_groups)
        model.history.append(entry)
        logger.debug("round %d %s", r + 1, entry)
    return model


def feature_importance(model: GbmModel) -> dict[str, float]:
    """Total split gain per feature."""
    totals = [0.0] * len(model.feature_names)
    for tree in model.trees:
        for f, g in zip(tree.feature, tree.gain):
            if f >= 0:
                totals[f] += g
    return dict(zip(model.feature_names, totals))


def predict_groups(model: GbmModel, groups: Sequence[LtrGroup]) -> list[np.ndarray]:
    return [model.predict(g.features) for g in groups]


def evaluate_model(model: GbmModel, groups: Sequence[LtrGroup]) -> float:
    return mean_ndcg(predict_groups(model, groups), groups) if groups else math.nan
