"""Estimator-style front end: recommenders with sklearn get_params/fit/predict
conventions so they compose with pipelines and grid tooling. ``predict``
returns the full score matrix for the requested users; ``recommend`` applies
train masking and returns top-k item indices.
"""

import numpy as np
import torch
from sklearn.base import BaseEstimator

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError
from .evaluation import MetricsReport, evaluate_rankings, rank_items
from .fingerprint import sha256_hex
from .model.losses import bpr_loss
from .model.network import GraphInputs, RecommenderNetwork, fusion_mode_for_arm
from .trainer import (
    FitResult,
    NegativeSampler,
    TrainConfig,
    TrainingData,
    fit_model,
)
from .validation import check_fitted, check_training_data, check_user_indices


class _RankingMixin:
    """Shared ranking/evaluation surface over fitted z_u_/z_i_ matrices."""

    def predict(self, users) -> np.ndarray:
        """Score every item for each requested user (no masking)."""
        check_fitted(self, ("z_u_", "z_i_"))
        users = check_user_indices(users, self.z_u_.shape[0])
        return self.z_u_[users] @ self.z_i_.T

    def recommend(self, users, k: int = 10, mask_train: bool = True):
        check_fitted(self, ("z_u_", "z_i_", "data_"))
        users = check_user_indices(users, self.z_u_.shape[0])
        train_items, _ = self.data_.bundle.train.neighbor_lists()
        scores = self.predict(users)
        return [
            rank_items(scores[row], train_items[u] if mask_train else (), k)
            for row, u in enumerate(users)
        ]

    def evaluate(self, part: str = "test", ks=(10, 20)) -> MetricsReport:
        check_fitted(self, ("z_u_", "z_i_", "data_"))
        return evaluate_rankings(
            lambda u: self.z_u_[u] @ self.z_i_.T,
            self.data_.bundle,
            ks=ks,
            part=part,
            config_fingerprint=getattr(self, "config_fingerprint_", ""),
        )


class FusionGraphRecommender(BaseEstimator, _RankingMixin):
    """Multimodal graph recommender with information-aware fusion.

    Parameters mirror the training configuration; ``arm`` selects an ablation
    variant ("full", "pooling", "concat", "weighted_concat", "raw_visual",
    "vlm_no_title" - the last two only change which visual table the caller
    supplies, the fusion stage stays full).
    """

    def __init__(self, embedding_dim=64, n_ui_layers=2, n_hom_layers=2, knn_k=10,
                 lambda_weight=0.1, tau=0.2, batch_size=1024, learning_rate=0.001,
                 max_epochs=1000, patience=20, seed=0, arm="full", attention_heads=4,
                 tied_directions=False, user_alignment=True, normalize_user_graph=True,
                 eval_ks=(10, 20), early_stopping_k=20, deterministic=True,
                 dtype="float32"):
        self.embedding_dim = embedding_dim
        self.n_ui_layers = n_ui_layers
        self.n_hom_layers = n_hom_layers
        self.knn_k = knn_k
        self.lambda_weight = lambda_weight
        self.tau = tau
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.arm = arm
        self.attention_heads = attention_heads
        self.tied_directions = tied_directions
        self.user_alignment = user_alignment
        self.normalize_user_graph = normalize_user_graph
        self.eval_ks = eval_ks
        self.early_stopping_k = early_stopping_k
        self.deterministic = deterministic
        self.dtype = dtype

    @classmethod
    def from_train_config(cls, cfg: TrainConfig, arm: str | None = None) -> "FusionGraphRecommender":
        return cls(
            embedding_dim=cfg.embedding_dim,
            n_ui_layers=cfg.n_ui_layers,
            n_hom_layers=cfg.n_hom_layers,
            knn_k=cfg.knn_k,
            lambda_weight=cfg.lambda_weight,
            tau=cfg.tau,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            max_epochs=cfg.max_epochs,
            patience=cfg.patience,
            seed=cfg.seed,
            arm=arm or cfg.arm,
            attention_heads=cfg.attention_heads,
            tied_directions=cfg.tied_directions,
            user_alignment=cfg.user_alignment,
            normalize_user_graph=cfg.normalize_user_graph,
            eval_ks=tuple(cfg.eval_ks),
            early_stopping_k=cfg.early_stopping_k,
            deterministic=cfg.deterministic,
            dtype=cfg.dtype,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            embedding_dim=self.embedding_dim,
            n_ui_layers=self.n_ui_layers,
            n_hom_layers=self.n_hom_layers,
            knn_k=self.knn_k,
            lambda_weight=self.lambda_weight,
            tau=self.tau,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
            arm=self.arm,
            attention_heads=self.attention_heads,
            tied_directions=self.tied_directions,
            user_alignment=self.user_alignment,
            normalize_user_graph=self.normalize_user_graph,
            eval_ks=tuple(self.eval_ks),
            early_stopping_k=self.early_stopping_k,
            deterministic=self.deterministic,
            dtype=self.dtype,
        ).validate()

    def config_fingerprint(self, data: TrainingData) -> str:
        return sha256_hex(
            {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.get_params().items()},
            data.bundle.fingerprint(),
            data.visual.fingerprint,
            data.textual.fingerprint,
        )

    def fit(self, X: TrainingData, y=None, log_fn=None):
        check_training_data(X)
        fingerprint = self.config_fingerprint(X)
        result: FitResult = fit_model(
            X, self._train_config(), log_fn=log_fn, config_fingerprint=fingerprint
        )
        self.data_ = X
        self.model_ = result.model
        self.inputs_ = result.inputs
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.validation_report_ = result.best_validation
        self.test_report_ = result.test_report
        self.config_fingerprint_ = fingerprint
        self._refresh_embeddings()
        return self

    def _refresh_embeddings(self):
        self.model_.eval()
        with torch.no_grad():
            out = self.model_(self.inputs_)
        self.z_u_ = out.z_u.detach().cpu().numpy().astype(np.float64)
        self.z_i_ = out.z_i.detach().cpu().numpy().astype(np.float64)

    def save(self, directory) -> None:
        check_fitted(self, ("model_",))
        tensors = {
            name: value.detach().cpu().numpy()
            for name, value in self.model_.state_dict().items()
        }
        save_checkpoint(
            directory,
            tensors,
            config_fingerprint=self.config_fingerprint_,
            extra={"params": {k: (list(v) if isinstance(v, tuple) else v)
                              for k, v in self.get_params().items()},
                   "best_epoch": self.best_epoch_},
        )

    @classmethod
    def load(cls, directory, data: TrainingData) -> "FusionGraphRecommender":
        """Rebuild a fitted estimator from a checkpoint plus its training data."""
        tensors, manifest = load_checkpoint(directory)
        params = dict(manifest["params"])
        params["eval_ks"] = tuple(params["eval_ks"])
        est = cls(**params)
        check_training_data(data)
        cfg = est._train_config()
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
        state = {
            name: torch.from_numpy(np.asarray(array)).to(cfg.torch_dtype)
            for name, array in tensors.items()
        }
        model.load_state_dict(state)
        est.data_ = data
        est.model_ = model
        est.inputs_ = inputs
        est.best_epoch_ = manifest.get("best_epoch", -1)
        est.config_fingerprint_ = manifest.get("config_fingerprint", "")
        est.history_ = []
        est._refresh_embeddings()
        return est


class PopularityRecommender(BaseEstimator, _RankingMixin):
    """Scores every item by its train-split interaction count."""

    def fit(self, X: TrainingData, y=None):
        check_training_data(X)
        counts = X.bundle.train.item_degrees().astype(np.float64)
        self.data_ = X
        self.z_i_ = counts.reshape(-1, 1)
        self.z_u_ = np.ones((X.bundle.n_users, 1), dtype=np.float64)
        self.config_fingerprint_ = sha256_hex("popularity", X.bundle.fingerprint())
        return self


class BPRMatrixFactorization(BaseEstimator, _RankingMixin):
    """Plain BPR-optimized matrix factorization, included as a sanity baseline."""

    def __init__(self, embedding_dim=64, learning_rate=0.01, batch_size=1024,
                 max_epochs=50, seed=0, deterministic=True):
        self.embedding_dim = embedding_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.seed = seed
        self.deterministic = deterministic

    def fit(self, X: TrainingData, y=None):
        check_training_data(X)
        if self.deterministic:
            torch.set_num_threads(1)
        train = X.bundle.train
        torch.manual_seed(self.seed)
        user_emb = torch.nn.Parameter(torch.empty(train.n_users, self.embedding_dim))
        item_emb = torch.nn.Parameter(torch.empty(train.n_items, self.embedding_dim))
        torch.nn.init.xavier_uniform_(user_emb)
        torch.nn.init.xavier_uniform_(item_emb)
        optimizer = torch.optim.Adam([user_emb, item_emb], lr=self.learning_rate)
        sampler = NegativeSampler(train, np.random.default_rng([self.seed, 1]))
        shuffle_rng = np.random.default_rng([self.seed, 2])
        pairs = train.pairs
        for _ in range(self.max_epochs):
            perm = shuffle_rng.permutation(len(pairs))
            for start in range(0, len(pairs), self.batch_size):
                batch = pairs[perm[start : start + self.batch_size]]
                neg = sampler.sample(batch[:, 0])
                keep = neg >= 0
                if not keep.any():
                    continue
                u = torch.from_numpy(batch[keep, 0])
                p = torch.from_numpy(batch[keep, 1])
                n = torch.from_numpy(neg[keep])
                pos_scores = (user_emb[u] * item_emb[p]).sum(1)
                neg_scores = (user_emb[u] * item_emb[n]).sum(1)
                loss = bpr_loss(pos_scores, neg_scores)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
        self.data_ = X
        self.z_u_ = user_emb.detach().numpy().astype(np.float64)
        self.z_i_ = item_emb.detach().numpy().astype(np.float64)
        self.config_fingerprint_ = sha256_hex(
            "bpr-mf", self.get_params(), X.bundle.fingerprint()
        )
        return self


BASELINES = {
    "popularity": PopularityRecommender,
    "bpr_mf": BPRMatrixFactorization,
}


def make_baseline(name: str):
    if name not in BASELINES:
        raise ConfigError(f"unknown baseline {name!r}; valid: {', '.join(sorted(BASELINES))}")
    return BASELINES[name]()
