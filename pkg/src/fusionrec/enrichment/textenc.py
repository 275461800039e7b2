"""Text encoders mapping strings to fixed-width dense vectors.

The default is an offline feature-hashing encoder: deterministic, dependency
free, and similarity-preserving at the token level, which is what the KNN
graph and the synthetic pipelines need. A sentence-transformer adapter is
provided for runs where the pretrained model is available locally.
"""

import hashlib
import re

import numpy as np

from ..errors import ConfigError

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class HashingTextEncoder:
    """Signed feature hashing over word unigrams, bigrams and char trigrams.

    A constant begin-of-text feature guarantees the empty string maps to a
    fixed nonzero vector rather than zeros. Rows are L2-normalized.
    """

    def __init__(self, dim: int = 384, seed: int = 0):
        if dim < 8:
            raise ConfigError(f"hashing encoder needs dim >= 8, got {dim}")
        self.dim = dim
        self.seed = seed

    @property
    def encoder_id(self) -> str:
        return f"hashing-v1/d{self.dim}/s{self.seed}"

    def _slot(self, feature: str):
        digest = hashlib.blake2b(
            feature.encode("utf-8"), digest_size=8, key=str(self.seed).encode()
        ).digest()
        value = int.from_bytes(digest, "little")
        return value % self.dim, 1.0 if (value >> 63) & 1 else -1.0

    def encode(self, text: str) -> np.ndarray:
        tokens = _TOKEN_RE.findall(text.lower())
        features = ["<bot>"]
        features.extend(tokens)
        features.extend(f"{a}_{b}" for a, b in zip(tokens, tokens[1:]))
        for token in tokens:
            padded = f"#{token}#"
            features.extend(padded[i : i + 3] for i in range(len(padded) - 2))
        vec = np.zeros(self.dim, dtype=np.float64)
        for feature in features:
            idx, sign = self._slot(feature)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec.astype(np.float32)

    def encode_many(self, texts) -> np.ndarray:
        return np.stack([self.encode(t) for t in texts]) if texts else np.zeros((0, self.dim), np.float32)


class SentenceTransformerEncoder:
    """Adapter around a locally available sentence-embedding model."""

    def __init__(self, model_name: str = "all-MiniLM-L6-v2", device: str = "cpu"):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            raise ConfigError(f"sentence-transformers is not installed: {e}") from e
        try:
            self._model = SentenceTransformer(model_name, device=device)
        except Exception as e:  # model weights missing, offline, etc.
            raise ConfigError(f"could not load sentence encoder {model_name!r}: {e}") from e
        self.model_name = model_name
        self.dim = int(self._model.get_sentence_embedding_dimension())

    @property
    def encoder_id(self) -> str:
        return f"sbert/{self.model_name}"

    def encode(self, text: str) -> np.ndarray:
        return self.encode_many([text])[0]

    def encode_many(self, texts) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), np.float32)
        out = self._model.encode(list(texts), convert_to_numpy=True, show_progress_bar=False)
        return np.asarray(out, dtype=np.float32)


def make_encoder(kind: str = "hashing", dim: int = 384, seed: int = 0,
                 model_name: str = "all-MiniLM-L6-v2"):
    if kind == "hashing":
        return HashingTextEncoder(dim=dim, seed=seed)
    if kind == "sbert":
        return SentenceTransformerEncoder(model_name=model_name)
    raise ConfigError(f"unknown text encoder kind {kind!r} (use 'hashing' or 'sbert')")
