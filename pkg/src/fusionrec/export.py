"""Export item embeddings with a 2-D principal-component projection for
external plotting."""

from pathlib import Path

import numpy as np


def pca_2d(matrix: np.ndarray) -> np.ndarray:
    """Top-2 principal-component coordinates of the centered rows."""
    centered = matrix - matrix.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    coords = centered @ vt[:2].T
    if coords.shape[1] < 2:  # degenerate width-1 input
        coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    return coords


def write_embeddings(path, item_ids, embeddings: np.ndarray) -> np.ndarray:
    """Write one row per item: id, embedding columns, then pc1 and pc2."""
    coords = pca_2d(embeddings)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        dim = embeddings.shape[1]
        header = ["item"] + [f"e{j}" for j in range(dim)] + ["pc1", "pc2"]
        f.write("\t".join(header) + "\n")
        for row, item_id in enumerate(item_ids):
            values = [f"{v:.6g}" for v in embeddings[row]] + [
                f"{coords[row, 0]:.6g}",
                f"{coords[row, 1]:.6g}",
            ]
            f.write(item_id + "\t" + "\t".join(values) + "\n")
    return coords
