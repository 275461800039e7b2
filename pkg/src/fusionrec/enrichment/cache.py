"""Content-addressed description cache.

One JSON file per key under a two-level directory fanout. Writes go through
a temp file plus atomic rename so a crash can never leave a torn entry, and
a hit never triggers a network call.
"""

import json
import os
import tempfile
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

from ..fingerprint import sha256_hex


@dataclass
class Description:
    item_key: str
    text: str
    model_name: str
    prompt_version: str
    created_at: str
    degraded: bool = False  # image absent; text fell back to the title


def cache_key(item_key: str, image_hash: str, prompt_version: str, model_name: str) -> str:
    return sha256_hex(item_key, image_hash, prompt_version, model_name)


class EnrichmentCache:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Description | None:
        path = self._path(key)
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as f:
            return Description(**json.load(f))

    def put(self, key: str, description: Description) -> None:
        path = self._path(key)
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as f:
                    json.dump(asdict(description), f, ensure_ascii=False)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*/*.json"))
