"""Procedural Gaussian initializers and point-cloud import.

Replaces learned shape initialization with seeded samplers: uniform fill of a
box, sphere surface, ellipsoid surface, or an imported point cloud. Scales are
set from the mean nearest-point spacing so the initial splats roughly tile the
sampled volume.
"""
from __future__ import annotations

import numpy as np

from semsplat.core.types import BoundingBox, GaussianCloud
from semsplat.errors import InvalidParameterError


def _default_scale(points, box_extent):
    n = max(len(points), 1)
    volume = float(np.prod(np.maximum(box_extent, 1e-9)))
    return max((volume / n) ** (1.0 / 3.0), 1e-4)


def _assign_regions(points, object_index, region_boxes):
    """Region index of the first box containing each point (boxes partition)."""
    n = len(points)
    region_l = np.zeros(n, dtype=np.int64)
    unassigned = np.ones(n, dtype=bool)
    for l, box in enumerate(region_boxes):
        hit = unassigned & box.contains(points)
        region_l[hit] = l
        unassigned &= ~hit
    if np.any(unassigned):
        # Points on shared boundaries can miss all boxes by rounding; snap to
        # the nearest region center.
        centers = np.stack([b.center for b in region_boxes])
        rest = points[unassigned]
        d = np.linalg.norm(rest[:, None, :] - centers[None, :, :], axis=-1)
        region_l[unassigned] = np.argmin(d, axis=1)
    region_ids = np.stack([np.full(n, object_index, dtype=np.int64), region_l], axis=1)
    return region_ids


def _build_cloud(points, scale, object_index, region_boxes, semantic_lookup, rng,
                 opacity, colors=None):
    n = len(points)
    region_ids = _assign_regions(points, object_index, region_boxes)
    if colors is None:
        colors = 0.5 + 0.1 * rng.standard_normal((n, 3))
        colors = np.clip(colors, 0.0, 1.0)
    semantics = np.stack([semantic_lookup(int(l)) for l in region_ids[:, 1]])
    quats = np.zeros((n, 4))
    quats[:, 0] = 1.0
    return GaussianCloud(
        means=points,
        scales=np.full((n, 3), scale),
        quats=quats,
        opacities=np.full(n, opacity),
        colors=colors,
        semantics=semantics,
        region_ids=region_ids,
    )


def sample_uniform_box(box: BoundingBox, count, object_index, region_boxes,
                       semantic_lookup, rng, opacity=0.8, scale_factor=0.75):
    if count <= 0:
        raise InvalidParameterError("count must be positive")
    points = rng.uniform(box.min_corner, box.max_corner, size=(count, 3))
    scale = scale_factor * _default_scale(points, box.extent)
    return _build_cloud(points, scale, object_index, region_boxes,
                        semantic_lookup, rng, opacity)


def sample_grid_box(box: BoundingBox, count, object_index, region_boxes,
                    semantic_lookup, rng, opacity=0.8, scale_factor=0.75):
    """Regular lattice fill: hole-free coverage at the same budget.

    `count` is rounded down to the nearest cube m^3; splats sit at cell
    centers with sigma = scale_factor * cell spacing (per axis).
    """
    if count <= 0:
        raise InvalidParameterError("count must be positive")
    m = max(int(round(count ** (1.0 / 3.0))), 1)
    axes = [
        box.min_corner[d] + (np.arange(m) + 0.5) * (box.extent[d] / m)
        for d in range(3)
    ]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    points = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    cloud = _build_cloud(points, 1.0, object_index, region_boxes,
                         semantic_lookup, rng, opacity)
    cloud.scales[:] = scale_factor * (box.extent / m)
    return cloud


def sample_sphere_surface(center, radius, count, object_index, region_boxes,
                          semantic_lookup, rng, opacity=0.8):
    if radius <= 0:
        raise InvalidParameterError("radius must be positive")
    dirs = rng.standard_normal((count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    points = np.asarray(center, dtype=np.float64) + radius * dirs
    # Surface samplers size splats from the per-point surface share.
    scale = max(radius * np.sqrt(4.0 * np.pi / count), 1e-4)
    extent = np.full(3, 2 * radius)
    return _build_cloud(points, min(scale, _default_scale(points, extent)),
                        object_index, region_boxes, semantic_lookup, rng, opacity)


def sample_ellipsoid_surface(center, radii, count, object_index, region_boxes,
                             semantic_lookup, rng, opacity=0.8):
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii <= 0):
        raise InvalidParameterError("radii must be positive")
    dirs = rng.standard_normal((count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    points = np.asarray(center, dtype=np.float64) + radii * dirs
    scale = max(float(np.mean(radii)) * np.sqrt(4.0 * np.pi / count), 1e-4)
    return _build_cloud(points, scale, object_index, region_boxes,
                        semantic_lookup, rng, opacity)


def import_point_cloud(path, object_index, region_boxes, semantic_lookup, rng,
                       opacity=0.8):
    """Load points from .npy/.npz: (N,3) positions or (N,6) positions+RGB."""
    data = np.load(path)
    if hasattr(data, "files"):  # npz
        points = np.asarray(data["points"], dtype=np.float64)
        colors = np.asarray(data["colors"], dtype=np.float64) if "colors" in data.files else None
    else:
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] not in (3, 6):
            raise InvalidParameterError("point cloud must be (N,3) or (N,6)")
        points = arr[:, :3]
        colors = arr[:, 3:6] if arr.shape[1] == 6 else None
    extent = points.max(axis=0) - points.min(axis=0)
    scale = 0.5 * _default_scale(points, extent)
    return _build_cloud(points, scale, object_index, region_boxes,
                        semantic_lookup, rng, opacity, colors=colors)
