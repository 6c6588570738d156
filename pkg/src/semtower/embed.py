"""Text embedding backends and cosine similarity.

Vectors are 1-D ``float64`` numpy arrays. Two backends exist:

* ``reference``: signed character-trigram hashing, fully deterministic and
  dependency-free. Used in tests and whenever real model weights are absent.
* ``remote``: an HTTP service speaking
  ``POST {"input": [str, ...]}`` -> ``{"embeddings": [[float, ...], ...]}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .errors import ConfigError, DimensionMismatchError, TransportError

DEFAULT_DIM = 1024

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "reference"
    dim: int = DEFAULT_DIM
    endpoint: str | None = None
    model_name: str | None = None
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind not in ("reference", "remote"):
            raise ConfigError(f"unknown embedder kind {self.kind!r}")
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ConfigError(f"embedder dim must be a positive integer, got {self.dim!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigError("remote embedder requires an endpoint")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.endpoint:
            out["endpoint"] = self.endpoint
        if self.model_name:
            out["model_name"] = self.model_name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EmbedderConfig":
        known = {"kind", "dim", "endpoint", "model_name", "timeout"}
        return cls(**{k: v for k, v in data.items() if k in known})


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def reference_embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Hash character trigrams of ``text.lower()`` into ``dim`` signed buckets.

    Each trigram's UTF-8 bytes go through 64-bit FNV-1a; the bucket is
    ``h % dim`` and the sign is ``-1`` when the top bit of ``h`` is set.
    Texts shorter than three characters contribute themselves as one gram.
    The count vector is L2-normalised; empty text (or a vector whose signed
    counts cancel exactly) gives the zero vector.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    low = text.lower()
    if not low:
        return vec
    if len(low) < 3:
        grams = [low]
    else:
        grams = [low[i : i + 3] for i in range(len(low) - 2)]
    for gram in grams:
        h = fnv1a_64(gram.encode("utf-8"))
        vec[h % dim] += -1.0 if h >> 63 else 1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


def _remote_embed(texts: Sequence[str], config: EmbedderConfig) -> list[np.ndarray]:
    try:
        resp = requests.post(config.endpoint, json={"input": list(texts)}, timeout=config.timeout)
        resp.raise_for_status()
        payload = resp.json()
    except (requests.RequestException, ValueError) as exc:
        raise TransportError(config.endpoint, exc) from exc
    rows = payload.get("embeddings") if isinstance(payload, dict) else None
    if not isinstance(rows, list) or len(rows) != len(texts):
        raise TransportError(config.endpoint, f"expected {len(texts)} embeddings in response")
    out = []
    for row in rows:
        vec = np.asarray(row, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != config.dim:
            got = vec.shape[0] if vec.ndim == 1 else -1
            raise DimensionMismatchError(config.dim, got, "remote embedding")
        if not np.all(np.isfinite(vec)):
            raise TransportError(config.endpoint, "non-finite embedding component")
        out.append(vec)
    return out


def embed_many(texts: Sequence[str], config: EmbedderConfig) -> list[np.ndarray]:
    if config.kind == "reference":
        return [reference_embed(t, config.dim) for t in texts]
    if not texts:
        return []
    return _remote_embed(texts, config)


def embed(text: str, config: EmbedderConfig) -> np.ndarray:
    return embed_many([text], config)[0]


def cosine(a, b) -> float:
    """Cosine similarity clamped to [-1, 1]; 0 when either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(a.shape[0] if a.ndim else 0, b.shape[0] if b.ndim else 0)
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    score = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, score))
