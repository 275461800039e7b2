"""Dense per-entity feature tables and their binary container format.

Container layout: magic ``VFT1``, little-endian u32 n_rows, u32 n_cols,
u8 dtype tag (0 = float32, 1 = float64), row-major payload. A sidecar JSON
file (``<path>.json``) carries the id index and bookkeeping.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, InternalError

MAGIC = b"VFT1"
_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


@dataclass
class FeatureTable:
    """One modality's features for one entity kind, row-aligned to a vocabulary."""

    kind: str  # "item" | "user"
    modality: str  # "visual" | "textual"
    ids: tuple
    matrix: np.ndarray  # (n, d) float
    fingerprint: str
    missing: frozenset = field(default_factory=frozenset)  # rows with no content

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix)
        if self.matrix.ndim != 2:
            raise InternalError(f"feature matrix must be 2-D, got {self.matrix.shape}")
        if self.matrix.shape[0] != len(self.ids):
            raise InternalError(
                f"{self.matrix.shape[0]} rows but {len(self.ids)} ids in feature table"
            )
        if not np.isfinite(self.matrix).all():
            raise DataError(f"non-finite entries in {self.kind}/{self.modality} features")
        self.missing = frozenset(int(i) for i in self.missing)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def write_matrix(path, matrix: np.ndarray) -> None:
    """Write a bare 2-D array in the binary container (no sidecar)."""
    matrix = np.ascontiguousarray(matrix)
    tag = _TAG_FOR.get(matrix.dtype)
    if tag is None:
        raise InternalError(f"unsupported dtype {matrix.dtype} for feature container")
    n, d = matrix.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIB", n, d, tag))
        f.write(matrix.astype(matrix.dtype.newbyteorder("<"), copy=False).tobytes())


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        n, d, tag = struct.unpack("<IIB", f.read(9))
        dtype = _DTYPE_TAGS.get(tag)
        if dtype is None:
            raise DataError(f"{path}: unknown dtype tag {tag}")
        payload = f.read(n * d * dtype.itemsize)
    if len(payload) != n * d * dtype.itemsize:
        raise DataError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype=dtype).reshape(n, d).copy()


def write_table(table: FeatureTable, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(path, table.matrix.astype(np.float32, copy=False))
    sidecar = {
        "kind": table.kind,
        "modality": table.modality,
        "ids": list(table.ids),
        "fingerprint": table.fingerprint,
        "missing": sorted(table.missing),
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, sort_keys=True)
        f.write("\n")


def read_table(path) -> FeatureTable:
    path = Path(path)
    matrix = read_matrix(path)
    sidecar_path = Path(str(path) + ".json")
    if not sidecar_path.exists():
        raise DataError(f"missing sidecar index {sidecar_path}")
    with open(sidecar_path, "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    return FeatureTable(
        kind=sidecar["kind"],
        modality=sidecar["modality"],
        ids=tuple(sidecar["ids"]),
        matrix=matrix,
        fingerprint=sidecar["fingerprint"],
        missing=frozenset(sidecar.get("missing", ())),
    )
