from .fusion import FusionComponents, InfoAwareFusion, fuse_user, orthogonal_residual
from .layers import CrossAttention, PairEncoder
from .losses import (
    LossBreakdown,
    bpr_loss,
    info_nce,
    redundancy_loss,
    synergy_loss,
    total_loss,
)
from .network import (
    ABLATION_ARMS,
    ForwardResult,
    GraphInputs,
    RecommenderNetwork,
    combine_residual,
    fusion_mode_for_arm,
    score,
)
from .propagation import graph_to_sparse, propagate_bipartite, propagate_homogeneous

__all__ = [
    "FusionComponents",
    "InfoAwareFusion",
    "fuse_user",
    "orthogonal_residual",
    "CrossAttention",
    "PairEncoder",
    "LossBreakdown",
    "bpr_loss",
    "info_nce",
    "redundancy_loss",
    "synergy_loss",
    "total_loss",
    "ABLATION_ARMS",
    "ForwardResult",
    "GraphInputs",
    "RecommenderNetwork",
    "combine_residual",
    "fusion_mode_for_arm",
    "score",
    "graph_to_sparse",
    "propagate_bipartite",
    "propagate_homogeneous",
]
