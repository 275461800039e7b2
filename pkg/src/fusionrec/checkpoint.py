"""Checkpoint directory: one binary container per tensor plus a JSON manifest
recording names, shapes, dtypes and the config fingerprint of the run.
"""

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import read_matrix, write_matrix


def _filename(name: str) -> str:
    return name.replace("/", "__") + ".vft"


def save_checkpoint(directory, tensors: dict, config_fingerprint: str = "",
                    extra: dict | None = None) -> None:
    """Write named arrays (any shape) to ``directory``; 1-D arrays are stored
    as single-row matrices, higher ranks flattened to (first_dim, rest)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"config_fingerprint": config_fingerprint, "tensors": {}}
    manifest.update(extra or {})
    for name, array in tensors.items():
        array = np.asarray(array)
        shape = list(array.shape)
        if array.ndim == 0:
            flat = array.reshape(1, 1)
        elif array.ndim == 1:
            flat = array.reshape(1, -1)
        else:
            flat = array.reshape(array.shape[0], -1)
        write_matrix(directory / _filename(name), flat)
        manifest["tensors"][name] = {
            "file": _filename(name),
            "shape": shape,
            "dtype": str(array.dtype),
        }
    with open(directory / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def load_checkpoint(directory):
    """Return (tensors, manifest) with original shapes and dtypes restored."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no checkpoint manifest at {directory}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    tensors = {}
    for name, info in manifest["tensors"].items():
        flat = read_matrix(directory / info["file"])
        tensors[name] = flat.reshape(info["shape"]).astype(info["dtype"])
    return tensors, manifest
