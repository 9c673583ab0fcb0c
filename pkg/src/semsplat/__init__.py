"""Compositional 3D Gaussian splatting driven by semantic-mask-composed denoising scores.

Subpackages:
    core      scene representation (Gaussians, objects, transforms, cameras), composition
    raster    differentiable tile-based splatting, reference renderer, analytic backward
    semantic  text embeddings, compression codec, semantic maps, masks, pooling
    layout    placement-program DSL, region trees, layout validation, planner clients
    guidance  noise schedule, guidance oracles, region-wise score composition
    optim     alternating local/global training loop, densify/prune, camera sampling
"""

__version__ = "0.1.0"

from semsplat.errors import (
    SemsplatError,
    InvalidParameterError,
    InvalidStateError,
    NotFoundError,
    ValidationError,
    ConfigError,
    OracleError,
)

__all__ = [
    "SemsplatError",
    "InvalidParameterError",
    "InvalidStateError",
    "NotFoundError",
    "ValidationError",
    "ConfigError",
    "OracleError",
]
