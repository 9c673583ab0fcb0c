"""Service configuration."""
from __future__ import annotations

from dataclasses import dataclass

DEFAULT_MODEL_ID = "runwayml/stable-diffusion-v1-5"
REAL_LATENT_HW = 64
REAL_LATENT_CHANNELS = 4


@dataclass
class ServiceConfig:
    mode: str = "mock"  # mock | real
    model_id: str = DEFAULT_MODEL_ID
    device: str = "cpu"
    cfg_scale: float = 7.5
    host: str = "127.0.0.1"
    port: int = 8731
    latent_hw: int = REAL_LATENT_HW  # mock mode may override; real mode is fixed
    d_h: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("mock", "real"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "real":
            self.latent_hw = REAL_LATENT_HW
