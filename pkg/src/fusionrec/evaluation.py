"""Full-ranking top-K evaluation: Recall@K and NDCG@K with train-item masking.

Per-user metrics are averaged over users holding at least one ground-truth
item; ties in scores break toward the lower item index so rankings are
deterministic.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import SplitBundle


@dataclass
class MetricsReport:
    recall: dict  # K -> float
    ndcg: dict  # K -> float
    n_users: int
    config_fingerprint: str = ""
    split_fingerprint: str = ""
    per_user: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "recall": {str(k): v for k, v in self.recall.items()},
            "ndcg": {str(k): v for k, v in self.ndcg.items()},
            "n_users": self.n_users,
            "config_fingerprint": self.config_fingerprint,
            "split_fingerprint": self.split_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            recall={int(k): v for k, v in data["recall"].items()},
            ndcg={int(k): v for k, v in data["ndcg"].items()},
            n_users=data["n_users"],
            config_fingerprint=data.get("config_fingerprint", ""),
            split_fingerprint=data.get("split_fingerprint", ""),
        )

    def to_text_table(self) -> str:
        ks = sorted(self.recall)
        header = "metric" + "".join(f"{'@' + str(k):>10}" for k in ks)
        recall_row = "recall" + "".join(f"{self.recall[k]:>10.4f}" for k in ks)
        ndcg_row = "ndcg  " + "".join(f"{self.ndcg[k]:>10.4f}" for k in ks)
        return "\n".join([header, recall_row, ndcg_row])


def rank_items(scores: np.ndarray, mask, k: int) -> np.ndarray:
    """Top-k item indices by score, masked items excluded, ties to lower index."""
    scores = np.asarray(scores, dtype=np.float64).copy()
    mask = np.asarray(sorted(set(int(m) for m in mask)), dtype=np.int64)
    if mask.size:
        scores[mask] = -np.inf
    available = len(scores) - mask.size
    if k > available:
        warnings.warn(f"requested top-{k} but only {available} unmasked items")
        k = available
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:k]


def recall_at_k(topk: np.ndarray, relevant: set, k: int) -> float:
    """Fraction of relevant items retrieved in the top k."""
    if not relevant:
        raise ValueError("recall is undefined for an empty relevant set")
    hits = sum(1 for idx in topk[:k] if int(idx) in relevant)
    return hits / len(relevant)


def ndcg_at_k(topk: np.ndarray, relevant: set, k: int) -> float:
    """Binary-relevance NDCG with 1/log2(rank+1) gains, IDCG over min(k, |relevant|)."""
    if not relevant:
        raise ValueError("ndcg is undefined for an empty relevant set")
    dcg = sum(
        1.0 / np.log2(rank + 2)
        for rank, idx in enumerate(topk[:k])
        if int(idx) in relevant
    )
    ideal = min(k, len(relevant))
    idcg = sum(1.0 / np.log2(rank + 2) for rank in range(ideal))
    return dcg / idcg


def evaluate_rankings(score_fn, bundle: SplitBundle, ks=(10, 20), part: str = "test",
                      config_fingerprint: str = "", keep_per_user: bool = False) -> MetricsReport:
    """Average per-user metrics over users with nonempty ground truth.

    ``score_fn(u)`` returns the user's score over all items; the user's train
    items are masked out before ranking.
    """
    target = {"validation": bundle.validation, "test": bundle.test}[part]
    ks = sorted(set(int(k) for k in ks))
    max_k = max(ks)
    train_items, _ = bundle.train.neighbor_lists()
    target_items, _ = target.neighbor_lists()

    sums = {k: {"recall": 0.0, "ndcg": 0.0} for k in ks}
    per_user = {k: {} for k in ks} if keep_per_user else None
    n_evaluated = 0
    for u in range(bundle.n_users):
        relevant = set(int(i) for i in target_items[u])
        if not relevant:
            continue
        n_evaluated += 1
        topk = rank_items(score_fn(u), train_items[u], max_k)
        for k in ks:
            r = recall_at_k(topk, relevant, k)
            n = ndcg_at_k(topk, relevant, k)
            sums[k]["recall"] += r
            sums[k]["ndcg"] += n
            if keep_per_user:
                per_user[k][u] = {"recall": r, "ndcg": n}

    denom = max(n_evaluated, 1)
    return MetricsReport(
        recall={k: sums[k]["recall"] / denom for k in ks},
        ndcg={k: sums[k]["ndcg"] / denom for k in ks},
        n_users=n_evaluated,
        config_fingerprint=config_fingerprint,
        split_fingerprint=bundle.fingerprint(),
        per_user=per_user or {},
    )
