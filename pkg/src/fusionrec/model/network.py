"""Full recommender network: per-modality bipartite propagation, the fusion
stage (information-aware or one of the ablation variants), homogeneous graph
propagation, residual combination, and dot-product scoring.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import ConfigError, InternalError
from ..graphs import SparseGraph
from .fusion import FusionComponents, InfoAwareFusion, fuse_user
from .propagation import graph_to_sparse, propagate_bipartite, propagate_homogeneous

FUSION_ARMS = ("full", "pooling", "concat", "weighted_concat")
FEATURE_ARMS = ("raw_visual", "vlm_no_title")
ABLATION_ARMS = FUSION_ARMS + FEATURE_ARMS


def fusion_mode_for_arm(arm: str) -> str:
    """Feature-source arms keep the full fusion stage."""
    if arm in FEATURE_ARMS:
        return "full"
    if arm in FUSION_ARMS:
        return arm
    raise ConfigError(f"unknown ablation arm {arm!r}; valid: {', '.join(ABLATION_ARMS)}")


@dataclass
class GraphInputs:
    """Immutable tensors the network propagates over (built once per fit)."""

    r_hat: torch.Tensor  # sparse |U| x |I|
    r_hat_t: torch.Tensor  # sparse |I| x |U|
    item_adj: torch.Tensor  # sparse |I| x |I|
    user_adj: torch.Tensor  # sparse |U| x |U|
    visual: torch.Tensor  # |I| x d_v
    textual: torch.Tensor  # |I| x d_t

    @classmethod
    def build(cls, bipartite: SparseGraph, item_graph: SparseGraph,
              user_graph: SparseGraph, visual: np.ndarray, textual: np.ndarray,
              dtype=torch.float32) -> "GraphInputs":
        return cls(
            r_hat=graph_to_sparse(bipartite, dtype),
            r_hat_t=graph_to_sparse(bipartite, dtype, transpose=True),
            item_adj=graph_to_sparse(item_graph, dtype),
            user_adj=graph_to_sparse(user_graph, dtype),
            visual=torch.from_numpy(np.ascontiguousarray(visual)).to(dtype),
            textual=torch.from_numpy(np.ascontiguousarray(textual)).to(dtype),
        )


@dataclass
class ForwardResult:
    z_u: torch.Tensor
    z_i: torch.Tensor
    item_fusion: FusionComponents | None
    user_fusion: FusionComponents | None


class RecommenderNetwork(nn.Module):
    """Trainable parameters and the end-to-end forward pass.

    ``fusion_mode`` selects the fusion stage: "full" is the information-aware
    module; "pooling", "concat" and "weighted_concat" are the simpler
    replacements used for ablation comparisons.
    """

    def __init__(self, n_users: int, n_items: int, d_visual: int, d_textual: int,
                 embedding_dim: int = 64, n_ui_layers: int = 2, n_hom_layers: int = 2,
                 attention_heads: int = 4, tied_directions: bool = False,
                 fusion_mode: str = "full", proj_eps: float = 1e-8,
                 dtype=torch.float32, seed: int = 0):
        super().__init__()
        if fusion_mode not in FUSION_ARMS:
            raise ConfigError(f"unknown fusion mode {fusion_mode!r}")
        self.n_users = n_users
        self.n_items = n_items
        self.embedding_dim = embedding_dim
        self.n_ui_layers = n_ui_layers
        self.n_hom_layers = n_hom_layers
        self.fusion_mode = fusion_mode
        self.dtype_ = dtype

        torch.manual_seed(seed)
        d = embedding_dim
        self.user_emb_v = nn.Parameter(torch.empty(n_users, d, dtype=dtype))
        self.user_emb_t = nn.Parameter(torch.empty(n_users, d, dtype=dtype))
        nn.init.xavier_uniform_(self.user_emb_v)
        nn.init.xavier_uniform_(self.user_emb_t)
        self.proj_v = nn.Linear(d_visual, d, dtype=dtype)
        self.proj_t = nn.Linear(d_textual, d, dtype=dtype)
        nn.init.xavier_uniform_(self.proj_v.weight)
        nn.init.xavier_uniform_(self.proj_t.weight)

        if fusion_mode == "full":
            self.fusion = InfoAwareFusion(
                d, heads=attention_heads, tied_directions=tied_directions,
                eps=proj_eps, dtype=dtype,
            )
            self.user_pref = nn.Parameter(torch.zeros(n_users, 3, dtype=dtype))
            nn.init.xavier_uniform_(self.user_pref)
        elif fusion_mode == "weighted_concat":
            self.segment_logits = nn.Parameter(torch.zeros(2, dtype=dtype))

    @property
    def fused_dim(self) -> int:
        if self.fusion_mode in ("full", "pooling"):
            return 3 * self.embedding_dim
        return 2 * self.embedding_dim

    def modality_embeddings(self, inputs: GraphInputs):
        """Bipartite propagation per modality; returns layer-summed embeddings."""
        iv0 = self.proj_v(inputs.visual)
        it0 = self.proj_t(inputs.textual)
        uv_bar, iv_bar = propagate_bipartite(
            inputs.r_hat, inputs.r_hat_t, self.user_emb_v, iv0, self.n_ui_layers
        )
        ut_bar, it_bar = propagate_bipartite(
            inputs.r_hat, inputs.r_hat_t, self.user_emb_t, it0, self.n_ui_layers
        )
        return uv_bar, ut_bar, iv_bar, it_bar

    def forward(self, inputs: GraphInputs) -> ForwardResult:
        uv_bar, ut_bar, iv_bar, it_bar = self.modality_embeddings(inputs)
        item_fusion = user_fusion = None

        if self.fusion_mode == "full":
            item_fusion = self.fusion(iv_bar, it_bar)
            user_fusion = self.fusion(uv_bar, ut_bar)
            i_f = item_fusion.fused
            weights = torch.softmax(self.user_pref, dim=1)
            u_f = fuse_user(ut_bar, user_fusion.s, user_fusion.v_prime, weights)
        elif self.fusion_mode == "pooling":
            i_f = (0.5 * (it_bar + iv_bar)).repeat(1, 3)
            u_f = (0.5 * (ut_bar + uv_bar)).repeat(1, 3)
        elif self.fusion_mode == "concat":
            i_f = torch.cat([it_bar, iv_bar], dim=1)
            u_f = torch.cat([ut_bar, uv_bar], dim=1)
        else:  # weighted_concat
            seg = torch.softmax(self.segment_logits, dim=0)
            i_f = torch.cat([seg[0] * it_bar, seg[1] * iv_bar], dim=1)
            u_f = torch.cat([seg[0] * ut_bar, seg[1] * uv_bar], dim=1)

        i_hom = propagate_homogeneous(inputs.item_adj, i_f, self.n_hom_layers)
        u_hom = propagate_homogeneous(inputs.user_adj, u_f, self.n_hom_layers)
        z_i = combine_residual(i_hom, i_f)
        z_u = combine_residual(u_hom, u_f)
        return ForwardResult(z_u, z_i, item_fusion, user_fusion)


def combine_residual(homogeneous: torch.Tensor, fused: torch.Tensor) -> torch.Tensor:
    """Residual combination of homogeneous-propagated and fused embeddings."""
    if homogeneous.shape != fused.shape:
        raise InternalError(
            f"shape mismatch in residual combination: {tuple(homogeneous.shape)} "
            f"vs {tuple(fused.shape)}"
        )
    return homogeneous + fused


def score(z_u: torch.Tensor, z_i: torch.Tensor) -> torch.Tensor:
    """Predicted interaction score: inner product of final embeddings."""
    return (z_u * z_i).sum(dim=-1)
