"""Grid and random hyperparameter search."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import LtrGroup
from .lambdamart import LambdaMartParams, evaluate_model, train_lambdamart

GRID_SPACE: dict[str, list] = {
    "learning_rate": [0.05, 0.1, 0.2],
    "max_depth": [4, 6, 8],
    "min_child_weight": [1, 5],
    "subsample": [0.8, 1.0],
    "colsample": [0.8, 1.0],
    "gamma": [0],
}

RANDOM_SPACE: dict[str, list] = {
    "learning_rate": [0.01, 0.05, 0.1, 0.2],
    "max_depth": [3, 4, 6, 8, 10],
    "min_child_weight": [1, 3, 5, 7],
    "subsample": [0.6, 0.8, 1.0],
    "colsample": [0.6, 0.8, 1.0],
    "gamma": [0, 0.1, 0.2, 0.5],
}


@dataclass
class TrialResult:
    params: LambdaMartParams
    train_ndcg: float
    valid_ndcg: float

    def as_row(self) -> dict:
        return {**asdict(self.params), "train_ndcg": self.train_ndcg, "valid_ndcg": self.valid_ndcg}


def enumerate_space(space: Mapping[str, Sequence], mode: str = "grid", trials: int | None = None,
                    seed: int = 0) -> list[LambdaMartParams]:
    """All grid points, or ``trials`` distinct points drawn uniformly at random."""
    if not space or any(len(v) == 0 for v in space.values()):
        raise ValueError("empty search space")
    keys = list(space)
    points = list(itertools.product(*(space[k] for k in keys)))
    if mode == "grid":
        chosen = points
    elif mode == "random":
        if trials is None or trials < 1:
            raise ValueError("random search needs trials >= 1")
        if trials > len(points):
            raise ValueError(f"{trials} trials exceed the {len(points)} points in the space")
        idx = np.random.default_rng(seed).choice(len(points), trials, replace=False)
        chosen = [points[i] for i in idx]
    else:
        raise ValueError(f"unknown search mode {mode!r}")
    return [LambdaMartParams(**dict(zip(keys, p))) for p in chosen]


def hyperparameter_search(
    train_groups: Sequence[LtrGroup],
    valid_groups: Sequence[LtrGroup],
    mode: str = "grid",
    space: Mapping[str, Sequence] | None = None,
    trials: int | None = None,
    seed: int = 0,
    rounds: int = 100,
) -> list[TrialResult]:
    """Train one model per configuration; results sorted by validation NDCG."""
    if space is None:
        space = GRID_SPACE if mode == "grid" else RANDOM_SPACE
    results = []
    for params in enumerate_space(space, mode, trials, seed):
        model = train_lambdamart(train_groups, params, rounds, valid_groups, seed)
        valid = evaluate_model(model, valid_groups) if valid_groups else math.nan
        results.append(TrialResult(params, model.history[-1]["train_ndcg"], valid))
    results.sort(key=lambda r: -r.valid_ndcg if not math.isnan(r.valid_ndcg) else math.inf)
    return results
