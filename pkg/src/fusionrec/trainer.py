"""Mini-batch BPR training with negative sampling and validation-based early
stopping. ``TrainingData`` carries the split plus feature tables and builds
any graph not supplied; ``fit_model`` runs the loop and restores the best
checkpoint before the final test evaluation.
"""

import copy
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .corpus import InteractionSet, SplitBundle
from .errors import ConfigError, DataError, NumericError
from .evaluation import MetricsReport, evaluate_rankings
from .features import FeatureTable
from .graphs import SparseGraph, build_item_knn, build_norm_bipartite, build_user_knn
from .model.losses import LossBreakdown, bpr_loss, redundancy_loss, synergy_loss, total_loss
from .model.network import (
    ABLATION_ARMS,
    GraphInputs,
    RecommenderNetwork,
    fusion_mode_for_arm,
    score,
)

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the reference training recipe."""

    batch_size: int = 1024
    learning_rate: float = 0.001
    embedding_dim: int = 64
    n_ui_layers: int = 2
    n_hom_layers: int = 2
    knn_k: int = 10
    lambda_weight: float = 0.1
    tau: float = 0.2
    max_epochs: int = 1000
    patience: int = 20
    seed: int = 0
    arm: str = "full"
    attention_heads: int = 4
    tied_directions: bool = False
    user_alignment: bool = True
    normalize_user_graph: bool = True
    eval_ks: tuple = (10, 20)
    early_stopping_k: int = 20
    deterministic: bool = True
    dtype: str = "float32"

    def validate(self) -> "TrainConfig":
        if self.arm not in ABLATION_ARMS:
            raise ConfigError(
                f"unknown ablation arm {self.arm!r}; valid: {', '.join(ABLATION_ARMS)}"
            )
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.lambda_weight < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lambda_weight}")
        if self.dtype not in _DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(_DTYPES)}")
        if self.early_stopping_k not in self.eval_ks:
            raise ConfigError(
                f"early_stopping_k={self.early_stopping_k} must be among eval_ks={self.eval_ks}"
            )
        return self

    @property
    def torch_dtype(self):
        return _DTYPES[self.dtype]


@dataclass
class TrainingData:
    """Prepared inputs for one fit: split, feature tables, optional graphs."""

    bundle: SplitBundle
    visual: FeatureTable
    textual: FeatureTable
    bipartite: SparseGraph | None = None
    item_graph: SparseGraph | None = None
    user_graph: SparseGraph | None = None

    def __post_init__(self):
        items = self.bundle.train.item_ids
        for table in (self.visual, self.textual):
            if table.ids != items:
                raise DataError(
                    f"{table.modality} feature table is not aligned to the item vocabulary"
                )

    def with_graphs(self, knn_k: int, normalize_user_graph: bool = True) -> "TrainingData":
        """Return a copy with any missing graph built from the train split."""
        return replace(
            self,
            bipartite=self.bipartite or build_norm_bipartite(self.bundle.train),
            item_graph=self.item_graph or build_item_knn(self.visual, self.textual, knn_k),
            user_graph=self.user_graph
            or build_user_knn(self.bundle.train, knn_k, normalize=normalize_user_graph),
        )


class NegativeSampler:
    """Uniform rejection sampler over items outside each user's train set."""

    def __init__(self, train: InteractionSet, rng: np.random.Generator):
        self.n_items = train.n_items
        self.rng = rng
        self.positives = [set() for _ in range(train.n_users)]
        for u, i in train.pairs:
            self.positives[u].add(int(i))
        self._saturated_warned = set()

    def sample(self, users: np.ndarray) -> np.ndarray:
        """One negative per row; -1 marks users interacting with every item."""
        out = np.empty(len(users), dtype=np.int64)
        for row, u in enumerate(users):
            pos = self.positives[int(u)]
            if len(pos) >= self.n_items:
                if int(u) not in self._saturated_warned:
                    warnings.warn(f"user {u} interacts with every item; skipping")
                    self._saturated_warned.add(int(u))
                out[row] = -1
                continue
            draw = int(self.rng.integers(0, self.n_items))
            while draw in pos:
                draw = int(self.rng.integers(0, self.n_items))
            out[row] = draw
        return out


def _alignment_losses(result, users, item_rows, cfg: TrainConfig):
    """Synergy/redundancy losses on the batch's item rows (and user rows)."""
    fi = result.item_fusion
    l_s = synergy_loss(fi.h_vt[item_rows], fi.h_tv[item_rows], cfg.tau)
    l_r = redundancy_loss(fi.h[item_rows], fi.h_v[item_rows], fi.h_t[item_rows], cfg.tau)
    if cfg.user_alignment:
        fu = result.user_fusion
        l_s = l_s + synergy_loss(fu.h_vt[users], fu.h_tv[users], cfg.tau)
        l_r = l_r + redundancy_loss(fu.h[users], fu.h_v[users], fu.h_t[users], cfg.tau)
    return l_s, l_r


def train_epoch(model: RecommenderNetwork, inputs: GraphInputs, train_pairs: np.ndarray,
                sampler: NegativeSampler, optimizer, cfg: TrainConfig,
                rng: np.random.Generator) -> LossBreakdown:
    """One pass over shuffled positive pairs; returns per-epoch mean losses."""
    model.train()
    perm = rng.permutation(len(train_pairs))
    shuffled = train_pairs[perm]
    has_fusion = fusion_mode_for_arm(cfg.arm) == "full"

    totals = np.zeros(3)
    n_batches = 0
    for start in range(0, len(shuffled), cfg.batch_size):
        batch = shuffled[start : start + cfg.batch_size]
        users = batch[:, 0]
        pos = batch[:, 1]
        neg = sampler.sample(users)
        keep = neg >= 0
        if not keep.any():
            continue
        users_t = torch.from_numpy(users[keep])
        pos_t = torch.from_numpy(pos[keep])
        neg_t = torch.from_numpy(neg[keep])

        result = model(inputs)
        pos_scores = score(result.z_u[users_t], result.z_i[pos_t])
        neg_scores = score(result.z_u[users_t], result.z_i[neg_t])
        l_rec = bpr_loss(pos_scores, neg_scores)
        if has_fusion:
            item_rows = torch.cat([pos_t, neg_t])
            l_s, l_r = _alignment_losses(result, users_t, item_rows, cfg)
        else:
            l_s = torch.zeros((), dtype=l_rec.dtype)
            l_r = torch.zeros((), dtype=l_rec.dtype)
        loss = total_loss(l_rec, l_s, l_r, cfg.lambda_weight)
        if not torch.isfinite(loss):
            raise NumericError(
                f"non-finite loss at batch starting {start}: "
                f"l_rec={l_rec.item()}, l_s={l_s.item()}, l_r={l_r.item()}, "
                f"users={users[keep][:8].tolist()}..."
            )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

        totals += (l_rec.item(), l_s.item(), l_r.item())
        n_batches += 1

    if n_batches == 0:
        raise DataError("epoch produced no usable batches")
    means = totals / n_batches
    return LossBreakdown(l_rec=means[0], l_s=means[1], l_r=means[2], lam=cfg.lambda_weight)


@dataclass
class FitResult:
    model: RecommenderNetwork
    inputs: GraphInputs
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_validation: MetricsReport | None = None
    test_report: MetricsReport | None = None
    config_fingerprint: str = ""


def _frozen_scores(model: RecommenderNetwork, inputs: GraphInputs):
    model.eval()
    with torch.no_grad():
        result = model(inputs)
    z_u = result.z_u.detach().cpu().numpy().astype(np.float64)
    z_i = result.z_i.detach().cpu().numpy().astype(np.float64)
    return z_u, z_i


def fit_model(data: TrainingData, cfg: TrainConfig, log_fn=None,
              config_fingerprint: str = "") -> FitResult:
    """Train until patience is exhausted on validation recall, restore the
    best parameters, and evaluate them on the test split."""
    cfg.validate()
    if cfg.deterministic:
        torch.set_num_threads(1)
    data = data.with_graphs(cfg.knn_k, cfg.normalize_user_graph)
    inputs = GraphInputs.build(
        data.bipartite, data.item_graph, data.user_graph,
        data.visual.matrix, data.textual.matrix, dtype=cfg.torch_dtype,
    )
    model = RecommenderNetwork(
        n_users=data.bundle.n_users,
        n_items=data.bundle.n_items,
        d_visual=data.visual.dim,
        d_textual=data.textual.dim,
        embedding_dim=cfg.embedding_dim,
        n_ui_layers=cfg.n_ui_layers,
        n_hom_layers=cfg.n_hom_layers,
        attention_heads=cfg.attention_heads,
        tied_directions=cfg.tied_directions,
        fusion_mode=fusion_mode_for_arm(cfg.arm),
        dtype=cfg.torch_dtype,
        seed=cfg.seed,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    sampler_rng = np.random.default_rng([cfg.seed, 1])
    shuffle_rng = np.random.default_rng([cfg.seed, 2])
    sampler = NegativeSampler(data.bundle.train, sampler_rng)
    train_pairs = data.bundle.train.pairs

    best_metric = -np.inf
    best_state = None
    best_epoch = -1
    best_validation = None
    epochs_since = 0
    history = []
    for epoch in range(cfg.max_epochs):
        breakdown = train_epoch(model, inputs, train_pairs, sampler, optimizer, cfg, shuffle_rng)
        z_u, z_i = _frozen_scores(model, inputs)
        val_report = evaluate_rankings(
            lambda u: z_u[u] @ z_i.T, data.bundle, ks=cfg.eval_ks,
            part="validation", config_fingerprint=config_fingerprint,
        )
        metric = val_report.recall[cfg.early_stopping_k]
        improved = metric > best_metric
        if improved:
            best_metric = metric
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch
            best_validation = val_report
            epochs_since = 0
        else:
            epochs_since += 1
        record = {
            "epoch": epoch,
            "l_rec": breakdown.l_rec,
            "l_s": breakdown.l_s,
            "l_r": breakdown.l_r,
            "total": breakdown.total,
            f"val_recall@{cfg.early_stopping_k}": metric,
            "best_epoch": best_epoch,
        }
        history.append(record)
        if log_fn is not None:
            log_fn(record)
        if epochs_since >= cfg.patience:
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    z_u, z_i = _frozen_scores(model, inputs)
    test_report = evaluate_rankings(
        lambda u: z_u[u] @ z_i.T, data.bundle, ks=cfg.eval_ks,
        part="test", config_fingerprint=config_fingerprint,
    )
    return FitResult(
        model=model,
        inputs=inputs,
        history=history,
        best_epoch=best_epoch,
        best_validation=best_validation,
        test_report=test_report,
        config_fingerprint=config_fingerprint,
    )
