"""Training objectives: symmetric in-batch InfoNCE for the alignment terms,
pairwise BPR for recommendation, and their weighted combination.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import ConfigError


@dataclass
class LossBreakdown:
    l_rec: float
    l_s: float
    l_r: float
    lam: float

    @property
    def total(self) -> float:
        return self.l_rec + self.lam * (self.l_s + self.l_r)


def info_nce(a: torch.Tensor, b: torch.Tensor, tau: float) -> torch.Tensor:
    """Symmetric InfoNCE over L2-normalized rows.

    Row i's positive is (a_i, b_i); every other row of the opposite matrix is
    a negative. Both directions are averaged. A single row yields zero loss.
    """
    if tau <= 0:
        raise ConfigError(f"InfoNCE temperature must be positive, got {tau}")
    a_n = F.normalize(a, dim=1)
    b_n = F.normalize(b, dim=1)
    logits = a_n @ b_n.T / tau
    labels = torch.arange(a.shape[0], device=a.device)
    return 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.T, labels))


def synergy_loss(h_vt: torch.Tensor, h_tv: torch.Tensor, tau: float) -> torch.Tensor:
    """Align the two cross-attention directions."""
    return info_nce(h_vt, h_tv, tau)


def redundancy_loss(h: torch.Tensor, h_v: torch.Tensor, h_t: torch.Tensor,
                    tau: float) -> torch.Tensor:
    """Align full and modality-masked encodings: three pairwise terms."""
    return info_nce(h, h_v, tau) + info_nce(h, h_t, tau) + info_nce(h_v, h_t, tau)


def bpr_loss(pos_scores: torch.Tensor, neg_scores: torch.Tensor) -> torch.Tensor:
    """Mean of -log sigmoid(pos - neg), computed as softplus(neg - pos)."""
    return F.softplus(neg_scores - pos_scores).mean()


def total_loss(l_rec: torch.Tensor, l_s: torch.Tensor, l_r: torch.Tensor,
               lam: float) -> torch.Tensor:
    if lam < 0:
        raise ConfigError(f"alignment weight must be >= 0, got {lam}")
    return l_rec + lam * (l_s + l_r)
