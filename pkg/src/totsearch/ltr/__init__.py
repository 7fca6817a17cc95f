"""LambdaMART reranking: sampling, features, training, inference, tuning."""

from .data import FEATURE_NAMES, LtrExample, LtrGroup, read_groups, split_groups, write_groups
from .features import FeatureContext, extract_features
from .lambdamart import (
    DegenerateDataError,
    GbmModel,
    LambdaMartParams,
    Tree,
    feature_importance,
    group_ndcg,
    lambda_gradients,
    train_lambdamart,
)
from .rerank import predict_and_rerank
from .sampling import SamplingPlan, golden_doc, sample_candidates, sample_training_set
from .tuning import GRID_SPACE, RANDOM_SPACE, enumerate_space, hyperparameter_search

__all__ = [
    "FEATURE_NAMES", "LtrExample", "LtrGroup", "read_groups", "split_groups", "write_groups",
    "FeatureContext", "extract_features", "DegenerateDataError", "GbmModel", "LambdaMartParams",
    "Tree", "feature_importance", "group_ndcg", "lambda_gradients", "train_lambdamart",
    "predict_and_rerank", "SamplingPlan", "golden_doc", "sample_candidates",
    "sample_training_set", "GRID_SPACE", "RANDOM_SPACE", "enumerate_space",
    "hyperparameter_search",
]
