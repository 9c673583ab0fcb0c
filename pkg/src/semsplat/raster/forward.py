"""Tile-based front-to-back alpha compositing of projected splats.

Per pixel v with depth-sorted contributors i:

    alpha_i = opacity_i * exp(-1/2 d^T conic d),  d = v - mean2d_i
    I(v) = sum_i color_i    * alpha_i * prod_{j<i} (1 - alpha_j)
    F(v) = sum_i semantic_i * alpha_i * prod_{j<i} (1 - alpha_j)

Contributions with alpha < 1/255 are skipped (also by the reference
renderer: it is part of the compositing definition, and it makes the splat
footprint cutoff exact because the footprint radius is sized to that floor).
Pixels whose transmittance falls below `transmittance_min` stop accepting
contributions; that is the only approximation relative to the reference.

Each 16x16 tile composites its depth-sorted splat list in one batched pass:
the per-pixel transmittance recursion is a cumulative product along the
depth axis, which keeps the Python cost at a few array operations per tile.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semsplat.core.types import Camera, GaussianCloud
from semsplat.raster.project import ALPHA_EPS, SplatBatch, project

TILE = 16
# Early-stop threshold. 1e-6 (rather than the looser 1e-4 typical for
# realtime splatting) bounds the dropped tail below the 1e-5 agreement
# budget against the reference renderer.
TRANSMITTANCE_MIN = 1e-6


@dataclass
class TileRecord:
    """One tile's retained compositing state for the backward pass."""

    rows: np.ndarray  # (n,) rows into the SplatBatch, depth-ordered
    alpha: np.ndarray  # (n, th, tw), zero where skipped
    t_before: np.ndarray  # (n, th, tw) transmittance before each splat
    y0: int
    x0: int


@dataclass
class RetainedState:
    splats: SplatBatch
    camera: Camera
    cloud: GaussianCloud  # the rendered cloud (read-only reference)
    n_gaussians: int
    feature_dim: int
    payload: np.ndarray  # (M, 3 + d_f)
    tiles: list  # [TileRecord]
    transmittance_min: float


@dataclass
class RenderOutput:
    color: np.ndarray  # (H, W, 3)
    semantic: np.ndarray  # (H, W, d_f)
    alpha: np.ndarray  # (H, W)
    culled_count: int
    retained: RetainedState | None = field(default=None, repr=False)


def depth_order(splats: SplatBatch):
    """Front-to-back order; ties broken by original index (stable sort)."""
    return np.argsort(splats.depths, kind="stable")


def _tile_alpha(splats, rows, ys, xs):
    """alpha (n, th, tw) for the given splats over the tile's pixel centers,
    already zeroed below the contribution floor."""
    means = splats.means2d[rows]
    conics = splats.conics[rows]
    dx = xs[None, :] - means[:, 0, None]  # (n, tw)
    dy = ys[None, :] - means[:, 1, None]  # (n, th)
    q = (
        conics[:, 0, None, None] * (dx * dx)[:, None, :]
        + 2.0 * conics[:, 1, None, None] * dy[:, :, None] * dx[:, None, :]
        + conics[:, 2, None, None] * (dy * dy)[:, :, None]
    )
    alpha = splats.opacities[rows, None, None] * np.exp(-0.5 * q)
    alpha[alpha < ALPHA_EPS] = 0.0
    return alpha


def render(gaussians: GaussianCloud, camera: Camera, retain=False,
           transmittance_min=TRANSMITTANCE_MIN) -> RenderOutput:
    height, width = camera.height, camera.width
    d_f = gaussians.feature_dim
    splats = project(gaussians, camera)
    payload = np.concatenate([splats.colors, splats.semantics], axis=1)
    out = np.zeros((height, width, 3 + d_f))
    alpha_acc = np.zeros((height, width))

    order = depth_order(splats)
    x0s = np.clip(np.floor(splats.means2d[:, 0] - splats.radii).astype(int), 0, width)
    x1s = np.clip(np.ceil(splats.means2d[:, 0] + splats.radii).astype(int) + 1, 0, width)
    y0s = np.clip(np.floor(splats.means2d[:, 1] - splats.radii).astype(int), 0, height)
    y1s = np.clip(np.ceil(splats.means2d[:, 1] + splats.radii).astype(int) + 1, 0, height)

    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE
    tile_lists = [[] for _ in range(tiles_x * tiles_y)]
    for row in order:
        if x0s[row] >= x1s[row] or y0s[row] >= y1s[row]:
            continue
        tx0, tx1 = x0s[row] // TILE, (x1s[row] - 1) // TILE
        ty0, ty1 = y0s[row] // TILE, (y1s[row] - 1) // TILE
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                tile_lists[ty * tiles_x + tx].append(row)

    records = []
    for ty in range(tiles_y):
        py0, py1 = ty * TILE, min((ty + 1) * TILE, height)
        for tx in range(tiles_x):
            px0, px1 = tx * TILE, min((tx + 1) * TILE, width)
            rows = tile_lists[ty * tiles_x + tx]
            if not rows:
                continue
            rows = np.asarray(rows)
            xs = np.arange(px0, px1) + 0.5
            ys = np.arange(py0, py1) + 0.5
            alpha = _tile_alpha(splats, rows, ys, xs)
            # transmittance before each contributor: exclusive cumprod
            t_after = np.cumprod(1.0 - alpha, axis=0)
            t_before = np.empty_like(t_after)
            t_before[0] = 1.0
            t_before[1:] = t_after[:-1]
            weight = np.where(t_before >= transmittance_min, alpha * t_before, 0.0)
            out[py0:py1, px0:px1] += np.tensordot(weight, payload[rows], axes=([0], [0]))
            alpha_acc[py0:py1, px0:px1] += weight.sum(axis=0)
            if retain:
                records.append(
                    TileRecord(rows=rows, alpha=alpha, t_before=t_before,
                               y0=py0, x0=px0)
                )

    retained = None
    if retain:
        retained = RetainedState(
            splats=splats, camera=camera, cloud=gaussians,
            n_gaussians=len(gaussians), feature_dim=d_f, payload=payload,
            tiles=records, transmittance_min=transmittance_min,
        )
    return RenderOutput(
        color=out[:, :, :3],
        semantic=out[:, :, 3:],
        alpha=alpha_acc,
        culled_count=splats.culled_count,
        retained=retained,
    )
