"""Covariance factorization, Gaussian evaluation, and local→global composition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from semsplat.core import rotations
from semsplat.core.types import Gaussian3D, GaussianCloud
from semsplat.errors import InvalidParameterError, NotFoundError


def covariance_from_factors(scale, rotation):
    """Sigma = R diag(scale)^2 R^T for one (scale, quaternion) pair or a batch."""
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(scale <= 0):
        raise InvalidParameterError("scale components must be positive")
    rot = rotations.quat_to_matrix(rotation)
    m = rot * scale[..., None, :]
    return m @ np.swapaxes(m, -1, -2)


def evaluate_density(g: Gaussian3D, x):
    """exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)), in (0, 1]."""
    cov = covariance_from_factors(g.scale, g.rotation)
    d = np.asarray(x, dtype=np.float64) - g.mean
    q = d @ np.linalg.solve(cov, d)
    return float(np.exp(-0.5 * q))


def transform_gaussian(g: Gaussian3D, xf) -> Gaussian3D:
    """Place a local-coordinate Gaussian in the scene.

    mean' = s R mean + t and Sigma' = s^2 R Sigma R^T, realized on the factored
    form as scale' = s * scale and rotation' = q_xf ⊗ q.
    """
    rot = xf.matrix
    return Gaussian3D(
        mean=xf.scale * rot @ g.mean + xf.translation,
        scale=xf.scale * g.scale,
        rotation=rotations.normalize(
            rotations.quat_multiply(xf.rotation, g.rotation)
        ),
        opacity=g.opacity,
        color=g.color.copy(),
        semantic=g.semantic.copy(),
        region_id=g.region_id,
    )


def transform_cloud(cloud: GaussianCloud, xf) -> GaussianCloud:
    """Vectorized transform_gaussian over a whole cloud."""
    rot = xf.matrix
    q_xf = rotations.normalize(xf.rotation)
    return GaussianCloud(
        means=xf.scale * cloud.means @ rot.T + xf.translation,
        scales=xf.scale * cloud.scales,
        quats=rotations.normalize(
            rotations.quat_multiply(q_xf[None, :], cloud.quats)
        ),
        opacities=cloud.opacities.copy(),
        colors=cloud.colors.copy(),
        semantics=cloud.semantics.copy(),
        region_ids=cloud.region_ids.copy(),
    )


@dataclass
class ComposedScene:
    """Flattened global cloud with provenance back into the scene's objects.

    object_slices maps object index k -> (start, stop) rows in `cloud`;
    object_order lists the object indices actually composed, in order.
    """

    cloud: GaussianCloud
    object_order: list
    object_slices: dict


def compose_scene(scene, subset=None) -> ComposedScene:
    """Concatenate the selected objects' Gaussians in global coordinates.

    Ordering is stable: scene object order, then per-object Gaussian order.
    `subset` is an optional list of object ids; unknown ids raise.
    """
    if subset is not None:
        known = {o.id for o in scene.objects}
        for oid in subset:
            if oid not in known:
                raise NotFoundError(f"unknown object id {oid!r}")
        selected = [k for k, o in enumerate(scene.objects) if o.id in set(subset)]
    else:
        selected = list(range(len(scene.objects)))

    parts, slices = [], {}
    start = 0
    for k in selected:
        part = transform_cloud(scene.objects[k].gaussians, scene.objects[k].transform)
        parts.append(part)
        slices[k] = (start, start + len(part))
        start += len(part)
    feature_dim = scene.objects[0].gaussians.feature_dim
    cloud = GaussianCloud.concatenate(parts) if parts else GaussianCloud.empty(feature_dim)
    return ComposedScene(cloud=cloud, object_order=selected, object_slices=slices)


@dataclass
class TransformGradients:
    scale: float
    rotation: np.ndarray  # (4,), w.r.t. raw transform quaternion
    translation: np.ndarray  # (3,)


def transform_backward(local_cloud: GaussianCloud, xf, d_means, d_scales, d_quats):
    """Chain per-Gaussian global-frame gradients through the object transform.

    Inputs are gradients w.r.t. the *global* mean/scale/quaternion of each
    transformed Gaussian. Returns (TransformGradients, gradients w.r.t. the
    local mean/scale/quaternion arrays).
    """
    rot = xf.matrix
    q_xf = rotations.normalize(xf.rotation)
    d_means = np.asarray(d_means, dtype=np.float64)
    d_scales = np.asarray(d_scales, dtype=np.float64)
    d_quats = np.asarray(d_quats, dtype=np.float64)

    # mean' = s R mu + t
    d_translation = d_means.sum(axis=0)
    rot_mu = local_cloud.means @ rot.T
    d_scale = float(np.sum(d_means * rot_mu)) + float(
        np.sum(d_scales * local_cloud.scales)
    )
    d_rot_matrix = xf.scale * d_means.T @ local_cloud.means  # dL/dR from mean path
    d_local_means = xf.scale * d_means @ rot

    # scale' = s * scale
    d_local_scales = xf.scale * d_scales

    # quat' = normalize(q_xf ⊗ q); chain the normalization first.
    raw_quats = rotations.quat_multiply(q_xf[None, :], local_cloud.quats)
    d_raw = rotations.normalize_backward(raw_quats, d_quats)
    left = rotations.quat_left_matrix(q_xf)
    d_local_quats = d_raw @ left  # L(q)^T rows
    # Sum over Gaussians of R(q_local_i)^T d_raw_i, vectorized.
    w, x, y, z = (local_cloud.quats[:, j] for j in range(4))
    d0, d1, d2, d3 = (d_raw[:, j] for j in range(4))
    right_sum = np.array(
        [
            np.sum(w * d0 + x * d1 + y * d2 + z * d3),
            np.sum(-x * d0 + w * d1 - z * d2 + y * d3),
            np.sum(-y * d0 + z * d1 + w * d2 - x * d3),
            np.sum(-z * d0 - y * d1 + x * d2 + w * d3),
        ]
    )
    d_q_unit = right_sum + rotations.quat_to_matrix_grad_unit(q_xf, d_rot_matrix)
    d_rotation = rotations.normalize_backward(xf.rotation, d_q_unit)

    return (
        TransformGradients(
            scale=d_scale, rotation=d_rotation, translation=d_translation
        ),
        d_local_means,
        d_local_scales,
        d_local_quats,
    )
