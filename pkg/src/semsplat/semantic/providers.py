"""Text-embedding providers.

Three interchangeable sources of d_h-dimensional text embeddings:
  * PseudoEmbeddingProvider - seeded hash expanded to a deterministic unit
    vector; keeps the whole pipeline runnable offline.
  * FileEmbeddingProvider   - lookup table loaded from an embedding table file.
  * RemoteEmbeddingProvider - the guidance service's /v1/encode_text endpoint.
"""
from __future__ import annotations

import hashlib

import numpy as np

from semsplat.errors import ConfigError, NotFoundError


def pseudo_embedding(text, d_h, seed=0):
    """Deterministic unit vector from sha256(seed:text) -> PCG64 -> normal.

    The guidance service's mock mode reproduces this byte-for-byte so the two
    components agree on embeddings for the same (seed, text).
    """
    digest = hashlib.sha256(f"{seed}:{text}".encode("utf-8")).digest()
    gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    vec = gen.standard_normal(d_h)
    return vec / np.linalg.norm(vec)


class PseudoEmbeddingProvider:
    kind = "pseudo"

    def __init__(self, d_h=512, seed=0):
        self.d_h = d_h
        self.seed = seed

    def encode(self, text):
        return pseudo_embedding(text, self.d_h, self.seed)


class FileEmbeddingProvider:
    kind = "file"

    def __init__(self, table):
        """table: dict text -> (d_h,) array, e.g. from tables.read_embedding_table."""
        if not table:
            raise ConfigError("embedding table is empty")
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.d_h = next(iter(self.table.values())).shape[0]

    def encode(self, text):
        if text not in self.table:
            raise NotFoundError(f"no embedding recorded for text {text!r}")
        return self.table[text].copy()


class RemoteEmbeddingProvider:
    kind = "remote"

    def __init__(self, base_url, timeout=30.0, session=None):
        import requests

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        health = self._session.get(f"{self.base_url}/v1/health", timeout=self.timeout)
        health.raise_for_status()
        self.d_h = int(health.json()["d_h"])

    def encode(self, text):
        resp = self._session.post(
            f"{self.base_url}/v1/encode_text", json={"text": text},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        vec = np.asarray(resp.json()["embedding"], dtype=np.float64)
        if vec.shape != (self.d_h,):
            raise ConfigError(
                f"service returned embedding of size {vec.shape}, expected {self.d_h}"
            )
        return vec
