"""Brute-force reference renderer used as a testing oracle.

Independent of the tiled path: its own projection loop, a full per-pixel
depth sort, every splat evaluated at every pixel (no footprint), and no
early termination. The only shared definitions are the compositing equation
itself, the 1/255 contribution floor, and the alpha clamp, all of which are
part of the rendering contract rather than performance cutoffs.
"""
from __future__ import annotations

import numpy as np

from semsplat.core.compose import covariance_from_factors
from semsplat.core.types import Camera, GaussianCloud
from semsplat.raster.forward import RenderOutput
from semsplat.raster.project import ALPHA_EPS, COV2D_REG


def render_reference(gaussians: GaussianCloud, camera: Camera) -> RenderOutput:
    height, width = camera.height, camera.width
    d_f = gaussians.feature_dim
    rot, cam_pos = camera.world_to_camera()
    f = camera.focal
    cx, cy = camera.width / 2.0, camera.height / 2.0

    means2d, conics, depths, payloads, opacities = [], [], [], [], []
    culled = 0
    for i in range(len(gaussians)):
        xyz = rot @ (gaussians.means[i] - cam_pos)
        x, y, z = xyz
        if z <= camera.near:
            culled += 1
            continue
        jac = np.array(
            [[f / z, 0.0, -f * x / z**2], [0.0, f / z, -f * y / z**2]]
        )
        a_mat = jac @ rot
        sigma = covariance_from_factors(gaussians.scales[i], gaussians.quats[i])
        cov2d = a_mat @ sigma @ a_mat.T + COV2D_REG * np.eye(2)
        means2d.append([f * x / z + cx, f * y / z + cy])
        conics.append(np.linalg.inv(cov2d))
        depths.append(z)
        payloads.append(
            np.concatenate([gaussians.colors[i], gaussians.semantics[i]])
        )
        opacities.append(gaussians.opacities[i])

    out = np.zeros((height, width, 3 + d_f))
    alpha_acc = np.zeros((height, width))
    if not means2d:
        return RenderOutput(
            color=out[:, :, :3], semantic=out[:, :, 3:], alpha=alpha_acc,
            culled_count=culled,
        )

    means2d = np.array(means2d)
    conics = np.array(conics)  # (M, 2, 2)
    depths = np.array(depths)
    payloads = np.array(payloads)
    opacities = np.array(opacities)
    order = np.argsort(depths, kind="stable")

    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    # (P, M) alpha matrix over flattened pixels, contributors sorted by depth.
    dx = xs[None, :, None] - means2d[None, None, order, 0]
    dy = ys[:, None, None] - means2d[None, None, order, 1]
    q = (
        conics[order, 0, 0] * dx**2
        + 2.0 * conics[order, 0, 1] * dx * dy
        + conics[order, 1, 1] * dy**2
    )
    alpha = opacities[order] * np.exp(-0.5 * q)
    alpha[alpha < ALPHA_EPS] = 0.0  # skipped contributions leave T unchanged

    ones = np.ones(alpha.shape[:2] + (1,))
    trans = np.concatenate([ones, np.cumprod(1.0 - alpha, axis=2)[:, :, :-1]], axis=2)
    weights = alpha * trans  # (H, W, M)
    out = np.einsum("hwm,mc->hwc", weights, payloads[order])
    alpha_acc = weights.sum(axis=2)
    return RenderOutput(
        color=out[:, :, :3], semantic=out[:, :, 3:], alpha=alpha_acc,
        culled_count=culled,
    )
