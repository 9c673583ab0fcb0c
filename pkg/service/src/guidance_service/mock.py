"""Deterministic mock backend.

Text embeddings reproduce the engine's offline pseudo-embedding exactly
(sha256 of "seed:text" seeding PCG64, standard normals, unit norm), so both
components agree on embeddings without sharing code.

Noise predictions are seeded pseudo-noise: the unconditional branch is a
function of (t, x_t), the conditional branch additionally hashes the full
prompt, and the returned epsilon applies classifier-free guidance

    eps = eps_uncond + cfg_scale * (eps_cond - eps_uncond)

so cfg_scale = 0 yields the unconditional branch alone. Identical request
bodies yield byte-identical responses.
"""
from __future__ import annotations

import hashlib

import numpy as np


def pseudo_text_embedding(text, d_h, seed=0):
    digest = hashlib.sha256(f"{seed}:{text}".encode("utf-8")).digest()
    gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    vec = gen.standard_normal(d_h)
    return vec / np.linalg.norm(vec)


def _seeded_noise(tag, t, x_t, seed):
    x_bytes = np.ascontiguousarray(x_t, dtype="<f4").tobytes()
    digest = hashlib.sha256()
    digest.update(tag.encode("utf-8"))
    digest.update(str(int(t)).encode("ascii"))
    digest.update(str(seed).encode("ascii"))
    digest.update(str(list(x_t.shape)).encode("ascii"))
    digest.update(x_bytes)
    gen = np.random.Generator(
        np.random.PCG64(int.from_bytes(digest.digest()[:16], "little"))
    )
    return gen.standard_normal(x_t.shape).astype(np.float32)


class MockBackend:
    model_id = "mock-denoiser"

    def __init__(self, config):
        self.config = config

    @property
    def latent_hw(self):
        return self.config.latent_hw

    @property
    def d_h(self):
        return self.config.d_h

    def encode_text(self, text):
        return pseudo_text_embedding(text, self.config.d_h, self.config.seed)

    def predict_noise(self, x_t, prompt, view_descriptor, t, cfg_scale):
        full_prompt = prompt if not view_descriptor else f"{prompt}, {view_descriptor}"
        eps_uncond = _seeded_noise("uncond", t, x_t, self.config.seed)
        eps_cond = _seeded_noise(f"cond:{full_prompt}", t, x_t, self.config.seed)
        return eps_uncond + np.float32(cfg_scale) * (eps_cond - eps_uncond)
