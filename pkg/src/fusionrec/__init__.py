"""Multimodal graph recommender with VLM-enriched visual features and
information-aware modality fusion."""

from .corpus import (
    InteractionSet,
    MetadataTable,
    SplitBundle,
    apply_kcore,
    load_interactions,
    load_metadata,
    split,
)
from .estimator import (
    BPRMatrixFactorization,
    FusionGraphRecommender,
    PopularityRecommender,
    make_baseline,
)
from .evaluation import MetricsReport, evaluate_rankings, ndcg_at_k, rank_items, recall_at_k
from .features import FeatureTable, read_table, write_table
from .graphs import SparseGraph, build_item_knn, build_norm_bipartite, build_user_knn
from .trainer import TrainConfig, TrainingData, fit_model

__version__ = "0.1.0"

__all__ = [
    "InteractionSet",
    "MetadataTable",
    "SplitBundle",
    "apply_kcore",
    "load_interactions",
    "load_metadata",
    "split",
    "BPRMatrixFactorization",
    "FusionGraphRecommender",
    "PopularityRecommender",
    "make_baseline",
    "MetricsReport",
    "evaluate_rankings",
    "ndcg_at_k",
    "rank_items",
    "recall_at_k",
    "FeatureTable",
    "read_table",
    "write_table",
    "SparseGraph",
    "build_item_knn",
    "build_norm_bipartite",
    "build_user_knn",
    "TrainConfig",
    "TrainingData",
    "fit_model",
    "__version__",
]
