"""Attention building blocks for the fusion module.

Entities carry one vector per modality, so cross-attention sees one query
token against one key/value token and the pair encoder self-attends over a
two-token sequence.
"""

import math

import torch
import torch.nn as nn

from ..errors import ConfigError


def _check_heads(dim: int, heads: int) -> int:
    if heads < 1 or dim % heads != 0:
        raise ConfigError(f"attention heads ({heads}) must divide the width ({dim})")
    return dim // heads


class CrossAttention(nn.Module):
    """Single-layer multi-head attention: query from one modality, key/value
    from the other. With a single key token the softmax is degenerate (weight
    one), so the output reduces to the value/output maps applied to the
    context; the query/key projections are kept for architectural fidelity.
    """

    def __init__(self, dim: int, heads: int = 4, dtype=torch.float32):
        super().__init__()
        self.dim = dim
        self.heads = heads
        self.head_dim = _check_heads(dim, heads)
        self.q_proj = nn.Linear(dim, dim, dtype=dtype)
        self.k_proj = nn.Linear(dim, dim, dtype=dtype)
        self.v_proj = nn.Linear(dim, dim, dtype=dtype)
        self.out_proj = nn.Linear(dim, dim, dtype=dtype)

    def forward(self, query: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        n = query.shape[0]
        q = self.q_proj(query).view(n, self.heads, self.head_dim)
        k = self.k_proj(context).view(n, self.heads, self.head_dim)
        v = self.v_proj(context).view(n, self.heads, self.head_dim)
        scores = (q * k).sum(-1, keepdim=True) / math.sqrt(self.head_dim)
        attn = torch.softmax(scores.unsqueeze(-1), dim=-2)  # singleton key axis
        attended = (attn.squeeze(-1) * v).view(n, self.dim)
        return self.out_proj(attended)


class PairEncoder(nn.Module):
    """Shared transformer encoder over two-token sequences: multi-head
    self-attention with a residual connection and layer norm."""

    def __init__(self, dim: int, heads: int = 4, dtype=torch.float32):
        super().__init__()
        self.dim = dim
        self.heads = heads
        self.head_dim = _check_heads(dim, heads)
        self.q_proj = nn.Linear(dim, dim, dtype=dtype)
        self.k_proj = nn.Linear(dim, dim, dtype=dtype)
        self.v_proj = nn.Linear(dim, dim, dtype=dtype)
        self.out_proj = nn.Linear(dim, dim, dtype=dtype)
        self.norm = nn.LayerNorm(dim, dtype=dtype)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        n, t, _ = tokens.shape
        q = self.q_proj(tokens).view(n, t, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(tokens).view(n, t, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(tokens).view(n, t, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        attn = torch.softmax(scores, dim=-1)
        mixed = (attn @ v).transpose(1, 2).reshape(n, t, self.dim)
        return self.norm(tokens + self.out_proj(mixed))
