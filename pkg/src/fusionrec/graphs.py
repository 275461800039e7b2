"""The three collaborative-filtering graphs: normalized user-item bipartite
adjacency, item-item KNN similarity graph, and user-user co-interaction graph.

All graphs are built from the train split only. Edge lists are ordered by
(source, rank) so identical inputs serialize byte-for-byte identically.
"""

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import InteractionSet
from .errors import DataError
from .features import FeatureTable
from .fingerprint import sha256_hex


@dataclass(frozen=True)
class SparseGraph:
    """Directed weighted edge list with a fixed (n_src, n_dst) shape."""

    kind: str
    n_src: int
    n_dst: int
    src: np.ndarray  # int64
    dst: np.ndarray  # int64
    weight: np.ndarray  # float64

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weight, (self.src, self.dst)), shape=(self.n_src, self.n_dst)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def fingerprint(self) -> str:
        return sha256_hex(self.kind, self.src, self.dst, self.weight.astype(np.float64))


def build_norm_bipartite(train: InteractionSet) -> SparseGraph:
    """Symmetric-normalized bipartite adjacency: w(u,i) = 1/sqrt(|N_u| |N_i|).

    Degrees come from the train split. Items with zero train degree keep
    empty rows (they received no edges).
    """
    if train.n_pairs == 0:
        raise DataError("cannot build bipartite graph from an empty train split")
    udeg = train.user_degrees().astype(np.float64)
    ideg = train.item_degrees().astype(np.float64)
    u = train.pairs[:, 0]
    i = train.pairs[:, 1]
    w = 1.0 / np.sqrt(udeg[u] * ideg[i])
    return SparseGraph("bipartite", train.n_users, train.n_items, u.copy(), i.copy(), w)


def _cosine_matrix(feats: np.ndarray) -> np.ndarray:
    """All-pairs cosine similarity; zero-norm rows contribute similarity 0."""
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    unit = feats / safe
    sim = unit @ unit.T
    return np.clip(sim, -1.0, 1.0)


def _topk_rows(sim: np.ndarray, k: int):
    """Per row: top-k columns by similarity, self excluded, ties to lower index."""
    n = sim.shape[0]
    srcs, dsts, ws = [], [], []
    for row in range(n):
        scores = sim[row].copy()
        scores[row] = -np.inf
        order = np.lexsort((np.arange(n), -scores))
        keep = order[:k]
        srcs.append(np.full(len(keep), row, dtype=np.int64))
        dsts.append(keep.astype(np.int64))
        ws.append(sim[row, keep].astype(np.float64))
    return np.concatenate(srcs), np.concatenate(dsts), np.concatenate(ws)


def build_item_knn(visual: FeatureTable, textual: FeatureTable, k: int) -> SparseGraph:
    """Item graph: per-modality cosine similarity averaged, per-item top-k kept.

    Kept edges carry the raw averaged similarity (no renormalization), per the
    aggregation rule they feed. Negative similarities survive if they rank.
    """
    if visual.n_rows != textual.n_rows:
        raise DataError(
            f"feature tables are not row-aligned: {visual.n_rows} vs {textual.n_rows}"
        )
    n = visual.n_rows
    if k < 1:
        raise DataError(f"item-graph k must be >= 1, got {k}")
    if k >= n:
        warnings.warn(f"item-graph k={k} >= n_items={n}; clipping to {n - 1}")
        k = n - 1
    sim = 0.5 * (
        _cosine_matrix(visual.matrix.astype(np.float64))
        + _cosine_matrix(textual.matrix.astype(np.float64))
    )
    src, dst, w = _topk_rows(sim, k)
    return SparseGraph("item_knn", n, n, src, dst, w)


def build_user_knn(train: InteractionSet, k: int, normalize: bool = True) -> SparseGraph:
    """User graph from co-interaction counts: top-k positive overlaps per user.

    Kept weights are row-normalized to sum to one (configurable); users with
    no overlap keep an empty row.
    """
    if k < 1:
        raise DataError(f"user-graph k must be >= 1, got {k}")
    n = train.n_users
    r = sp.csr_matrix(
        (np.ones(train.n_pairs), (train.pairs[:, 0], train.pairs[:, 1])),
        shape=(n, train.n_items),
    )
    overlap = (r @ r.T).toarray()
    np.fill_diagonal(overlap, 0)

    srcs, dsts, ws = [], [], []
    for u in range(n):
        row = overlap[u]
        pos = np.flatnonzero(row > 0)
        if len(pos) == 0:
            continue
        order = np.lexsort((pos, -row[pos]))
        keep = pos[order[: min(k, len(pos))]]
        weights = row[keep].astype(np.float64)
        if normalize:
            weights = weights / weights.sum()
        srcs.append(np.full(len(keep), u, dtype=np.int64))
        dsts.append(keep.astype(np.int64))
        ws.append(weights)
    if not srcs:
        empty = np.zeros(0, dtype=np.int64)
        return SparseGraph("user_knn", n, n, empty, empty.copy(), np.zeros(0))
    return SparseGraph(
        "user_knn", n, n, np.concatenate(srcs), np.concatenate(dsts), np.concatenate(ws)
    )


def write_graph(graph: SparseGraph, path, extra_header: dict | None = None) -> None:
    """Serialize as (u32 src, u32 dst, f32 w) triplets plus a JSON header file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        for s, d, w in zip(graph.src, graph.dst, graph.weight):
            f.write(struct.pack("<IIf", int(s), int(d), float(w)))
    header = {
        "kind": graph.kind,
        "n_src": graph.n_src,
        "n_dst": graph.n_dst,
        "n_edges": graph.n_edges,
        "fingerprint": graph.fingerprint(),
    }
    header.update(extra_header or {})
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        json.dump(header, f, sort_keys=True, indent=2)
        f.write("\n")


def read_graph(path) -> SparseGraph:
    path = Path(path)
    header_path = Path(str(path) + ".json")
    if not path.exists() or not header_path.exists():
        raise DataError(f"graph file not found: {path}")
    with open(header_path, "r", encoding="utf-8") as f:
        header = json.load(f)
    record = struct.Struct("<IIf")
    src, dst, w = [], [], []
    with open(path, "rb") as f:
        data = f.read()
    for (s, d, wt) in record.iter_unpack(data):
        src.append(s)
        dst.append(d)
        w.append(wt)
    return SparseGraph(
        header["kind"],
        header["n_src"],
        header["n_dst"],
        np.asarray(src, dtype=np.int64),
        np.asarray(dst, dtype=np.int64),
        np.asarray(w, dtype=np.float64),
    )
