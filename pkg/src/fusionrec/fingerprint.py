"""Content fingerprints used to key caches and detect stale artifacts."""

import hashlib
import json

import numpy as np


def canonical_json(obj) -> bytes:
    """Serialize ``obj`` to deterministic JSON bytes (sorted keys, no spaces)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def sha256_hex(*parts) -> str:
    """Hash a sequence of byte/str/array parts into one hex digest.

    Each part is length-prefixed so concatenation ambiguities cannot collide.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            data = part.encode("utf-8")
        elif isinstance(part, np.ndarray):
            data = np.ascontiguousarray(part).tobytes() + str(part.shape).encode()
        elif isinstance(part, bytes):
            data = part
        else:
            data = canonical_json(part)
        h.update(len(data).to_bytes(8, "little"))
        h.update(data)
    return h.hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
