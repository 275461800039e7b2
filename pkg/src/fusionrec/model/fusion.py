"""Information-aware fusion: synergy via cross-modal attention, redundancy
via a shared masked pair encoder, unique visual signal via orthogonal
projection, and concatenation into fused item/user vectors.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .layers import CrossAttention, PairEncoder


@dataclass
class FusionComponents:
    """All intermediates of one fusion pass (rows = entities)."""

    h_vt: torch.Tensor  # vision querying text
    h_tv: torch.Tensor  # text querying vision
    s: torch.Tensor  # synergy: mean of the two directions
    h: torch.Tensor  # encoding of the full pair
    h_v: torch.Tensor  # encoding with text masked
    h_t: torch.Tensor  # encoding with vision masked
    r: torch.Tensor  # redundancy: mean of the three encodings
    v_prime: torch.Tensor  # visual part orthogonal to r
    fused: torch.Tensor  # [t || s || v'] (width 3d)


def orthogonal_residual(v: torch.Tensor, r: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    """Remove the projection of v onto r per row: v' = v - (<v,r>/||r||^2) r.

    Rows where ||r||^2 < eps keep v unchanged.
    """
    norm_sq = (r * r).sum(dim=-1, keepdim=True)
    coeff = (v * r).sum(dim=-1, keepdim=True) / norm_sq.clamp_min(eps)
    projected = v - coeff * r
    return torch.where(norm_sq < eps, v, projected)


class InfoAwareFusion(nn.Module):
    """Shared fusion module applied to item and user modality pairs alike.

    ``tied_directions`` reuses one attention block for both query directions.
    """

    def __init__(self, dim: int, heads: int = 4, tied_directions: bool = False,
                 eps: float = 1e-8, dtype=torch.float32):
        super().__init__()
        self.dim = dim
        self.eps = eps
        self.tied_directions = tied_directions
        self.cross_vt = CrossAttention(dim, heads, dtype=dtype)
        self.cross_tv = self.cross_vt if tied_directions else CrossAttention(dim, heads, dtype=dtype)
        self.encoder = PairEncoder(dim, heads, dtype=dtype)
        self.project = nn.Linear(dim, dim, dtype=dtype)
        self.mask_v = nn.Parameter(torch.zeros(dim, dtype=dtype))
        self.mask_t = nn.Parameter(torch.zeros(dim, dtype=dtype))
        nn.init.normal_(self.mask_v, std=0.02)
        nn.init.normal_(self.mask_t, std=0.02)

    def _encode_pair(self, first: torch.Tensor, second: torch.Tensor) -> torch.Tensor:
        tokens = torch.stack([first, second], dim=1)
        encoded = self.encoder(tokens).mean(dim=1)
        return self.project(encoded)

    def forward(self, v: torch.Tensor, t: torch.Tensor) -> FusionComponents:
        h_vt = self.cross_vt(v, t)
        h_tv = self.cross_tv(t, v)
        s = 0.5 * (h_vt + h_tv)

        n = v.shape[0]
        mask_v = self.mask_v.unsqueeze(0).expand(n, -1)
        mask_t = self.mask_t.unsqueeze(0).expand(n, -1)
        h = self._encode_pair(v, t)
        h_v = self._encode_pair(v, mask_t)
        h_t = self._encode_pair(mask_v, t)
        r = (h + h_v + h_t) / 3.0

        v_prime = orthogonal_residual(v, r, self.eps)
        fused = torch.cat([t, s, v_prime], dim=1)
        return FusionComponents(h_vt, h_tv, s, h, h_v, h_t, r, v_prime, fused)


def fuse_user(t_u: torch.Tensor, s_u: torch.Tensor, v_prime_u: torch.Tensor,
              weights: torch.Tensor) -> torch.Tensor:
    """Weighted concatenation [w0*t || w1*s || w2*v'] with per-user weights (n, 3)."""
    return torch.cat(
        [weights[:, 0:1] * t_u, weights[:, 1:2] * s_u, weights[:, 2:3] * v_prime_u],
        dim=1,
    )
