"""Latent-diffusion backend wrapping a pretrained pipeline.

Owns the text encoder and the UNet noise prediction; classifier-free
guidance happens here so callers see a single epsilon per request. Heavy
dependencies (torch, diffusers) are imported lazily: constructing the
backend without them installed, or without the checkpoint available, raises
a clear startup error instead of serving.
"""
from __future__ import annotations

import numpy as np

from guidance_service.config import REAL_LATENT_CHANNELS, REAL_LATENT_HW


class ModelLoadError(RuntimeError):
    pass


class RealBackend:
    def __init__(self, config):
        self.config = config
        self.model_id = config.model_id
        try:
            import torch
            from diffusers import StableDiffusionPipeline
        except ImportError as err:
            raise ModelLoadError(
                f"real mode needs torch+diffusers installed: {err}"
            )
        try:
            self._torch = torch
            self.pipe = StableDiffusionPipeline.from_pretrained(
                config.model_id,
                torch_dtype=torch.float32 if config.device == "cpu" else torch.float16,
                safety_checker=None,
            ).to(config.device)
        except Exception as err:  # noqa: BLE001 - hub/IO errors vary
            raise ModelLoadError(f"could not load {config.model_id!r}: {err}")
        self.pipe.unet.eval()
        self._embed_cache = {}

    @property
    def latent_hw(self):
        return REAL_LATENT_HW

    @property
    def d_h(self):
        return int(self.pipe.text_encoder.config.hidden_size)

    def _encode(self, text):
        if text in self._embed_cache:
            return self._embed_cache[text]
        torch = self._torch
        tokens = self.pipe.tokenizer(
            text, padding="max_length", truncation=True,
            max_length=self.pipe.tokenizer.model_max_length, return_tensors="pt",
        ).to(self.pipe.device)
        with torch.no_grad():
            out = self.pipe.text_encoder(**tokens)
        self._embed_cache[text] = out
        return out

    def encode_text(self, text):
        torch = self._torch
        out = self._encode(text)
        pooled = out.pooler_output if hasattr(out, "pooler_output") else out[0].mean(1)
        vec = pooled[0].detach().cpu().numpy().astype(np.float64)
        return vec / np.linalg.norm(vec)

    def predict_noise(self, x_t, prompt, view_descriptor, t, cfg_scale):
        torch = self._torch
        if tuple(x_t.shape) != (REAL_LATENT_CHANNELS, REAL_LATENT_HW, REAL_LATENT_HW):
            raise ValueError(
                f"real mode expects latents of shape "
                f"({REAL_LATENT_CHANNELS}, {REAL_LATENT_HW}, {REAL_LATENT_HW})"
            )
        full_prompt = prompt if not view_descriptor else f"{prompt}, {view_descriptor}"
        cond = self._encode(full_prompt)[0]
        uncond = self._encode("")[0]
        latents = torch.from_numpy(np.ascontiguousarray(x_t, dtype=np.float32))
        latents = latents[None].to(self.pipe.device, dtype=self.pipe.unet.dtype)
        timestep = torch.tensor([int(t)], device=self.pipe.device)
        with torch.no_grad():
            eps_cond = self.pipe.unet(latents, timestep, encoder_hidden_states=cond).sample
            eps_uncond = self.pipe.unet(latents, timestep, encoder_hidden_states=uncond).sample
        eps = eps_uncond + cfg_scale * (eps_cond - eps_uncond)
        return eps[0].float().cpu().numpy()
