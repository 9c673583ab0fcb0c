"""Adaptive density control: gradient-driven clone/split, compactness
insertion between mutually distant neighbors, and pruning."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from semsplat.core import rotations
from semsplat.errors import InvalidStateError
from semsplat.optim.state import ObjectState, sigmoid


def densify_object(state: ObjectState, config, scene_extent, rng):
    """Clone small / split large Gaussians whose mean accumulated view-space
    positional gradient exceeds the threshold; embeddings and region ids are
    copied to the offspring."""
    n = len(state)
    if n == 0:
        return None
    counts = np.maximum(state.grad_count, 1)
    mean_grad = state.grad_accum / counts
    hot = (mean_grad > config.grad_threshold) & (state.grad_count > 0)
    if not hot.any():
        state.reset_grad_stats()
        return None

    large = state.scale.max(axis=1) > config.split_scale_fraction * scene_extent
    split_mask = hot & large
    clone_mask = hot & ~large

    budget = config.max_gaussians - n
    wanted = int(clone_mask.sum() + split_mask.sum())
    capped = wanted > budget
    if capped:
        # favor splits (they bound oversized Gaussians); drop clones first
        order = np.nonzero(clone_mask)[0]
        drop = wanted - budget
        clone_mask = clone_mask.copy()
        clone_mask[order[: min(drop, len(order))]] = False
        drop -= min(drop, len(order))
        if drop > 0:
            order = np.nonzero(split_mask)[0]
            split_mask = split_mask.copy()
            split_mask[order[:drop]] = False

    clone_idx = np.nonzero(clone_mask)[0]
    split_idx = np.nonzero(split_mask)[0]

    rows = {
        "mean": [], "scale": [], "quat": [], "opacity": [], "color": [],
        "semantic": [], "region_ids": [],
    }

    def emit(idx, mean, scale):
        rows["mean"].append(mean)
        rows["scale"].append(scale)
        rows["quat"].append(state.quat[idx])
        rows["opacity"].append(state.opacity[idx])
        rows["color"].append(state.color[idx])
        rows["semantic"].append(state.semantic[idx])
        rows["region_ids"].append(state.region_ids[idx])

    for idx in clone_idx:
        emit(idx, state.mean[idx].copy(), state.scale[idx].copy())

    for idx in split_idx:
        rot = rotations.quat_to_matrix(state.quat[idx])
        for _ in range(2):
            offset = rot @ (state.scale[idx] * rng.standard_normal(3))
            emit(idx, state.mean[idx] + offset, state.scale[idx] / config.split_factor)

    keep = np.ones(n, dtype=bool)
    keep[split_idx] = False  # split parents are replaced by their children
    state.select_rows(np.nonzero(keep)[0])
    if rows["mean"]:
        state.append_rows({k: np.stack(v) for k, v in rows.items()})
    state.reset_grad_stats()
    return {
        "kind": "densify",
        "object": state.object_id,
        "cloned": int(len(clone_idx)),
        "split": int(len(split_idx)),
        "capped": bool(capped),
        "count": len(state),
    }


def compactness_object(state: ObjectState, rng, max_gaussians):
    """Insert a midpoint Gaussian between each Gaussian and its nearest
    neighbor when the gap between their footprints stays open."""
    n = len(state)
    if n < 2:
        return None
    tree = cKDTree(state.mean)
    dist, idx = tree.query(state.mean, k=2)
    neighbor = idx[:, 1]
    gap_pairs = []
    radius = state.scale.max(axis=1)
    for i in range(n):
        j = int(neighbor[i])
        gap = dist[i, 1] - (radius[i] + radius[j])
        if gap > 0:
            gap_pairs.append((min(i, j), max(i, j)))
    pairs = sorted(set(gap_pairs))
    if not pairs:
        return None
    budget = max_gaussians - n
    capped = len(pairs) > budget
    pairs = pairs[: max(budget, 0)]
    if not pairs:
        return None

    rows = {
        "mean": [], "scale": [], "quat": [], "opacity": [], "color": [],
        "semantic": [], "region_ids": [],
    }
    for i, j in pairs:
        rows["mean"].append(0.5 * (state.mean[i] + state.mean[j]))
        rows["scale"].append(0.5 * (state.scale[i] + state.scale[j]))
        rows["quat"].append(state.quat[i])
        opacity_mid = 0.5 * (sigmoid(state.opacity[i]) + sigmoid(state.opacity[j]))
        rows["opacity"].append(np.log(opacity_mid / (1 - opacity_mid)))
        rows["color"].append(0.5 * (state.color[i] + state.color[j]))
        rows["semantic"].append(state.semantic[i])
        rows["region_ids"].append(state.region_ids[i])
    state.append_rows({k: np.stack(v) for k, v in rows.items()})
    return {
        "kind": "compactness",
        "object": state.object_id,
        "inserted": len(pairs),
        "capped": bool(capped),
        "count": len(state),
    }


def prune_object(state: ObjectState, config, scene_extent, image_diag):
    """Drop Gaussians that are nearly transparent or oversized in world or
    view space; an object losing every Gaussian is a hard error."""
    n = len(state)
    opacity = sigmoid(state.opacity)
    low_opacity = opacity < config.min_opacity
    world_radius = float(state.t_scale[0]) * state.scale.max(axis=1)
    too_big_world = world_radius > config.world_radius_fraction * scene_extent
    too_big_view = state.max_view_radius > config.view_radius_fraction * image_diag
    remove = low_opacity | too_big_world | too_big_view
    if not remove.any():
        state.max_view_radius[:] = 0.0
        return None
    if remove.all():
        raise InvalidStateError(
            f"pruning removed every Gaussian of object {state.object_id!r}"
        )
    event = {
        "kind": "prune",
        "object": state.object_id,
        "removed": int(remove.sum()),
        "low_opacity": int(low_opacity.sum()),
        "world_radius": int(too_big_world.sum()),
        "view_radius": int(too_big_view.sum()),
        "count": n - int(remove.sum()),
    }
    state.select_rows(np.nonzero(~remove)[0])
    state.max_view_radius[:] = 0.0
    return event
