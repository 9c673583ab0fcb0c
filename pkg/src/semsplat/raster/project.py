"""Perspective projection of 3D Gaussians to screen-space splats.

Pixel-space covariance uses the first-order Jacobian transfer
cov2d = J W Sigma W^T J^T + 0.3 I. The splat footprint radius is sized so
that every contribution outside it falls below the 1/255 alpha floor shared
by both renderers, which keeps the tiled footprint cutoff exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from semsplat.core.compose import covariance_from_factors
from semsplat.core.types import Camera, GaussianCloud

COV2D_REG = 0.3  # px^2 added to the diagonal; standard splatting practice
ALPHA_EPS = 1.0 / 255.0
# alpha = o * exp(-q/2) < 1/255 for all o <= 1 once q > 2 ln 255; the
# footprint radius sqrt(2 ln 255) * sigma_max therefore only discards
# contributions the compositor skips anyway.
FOOTPRINT_SIGMA = float(np.sqrt(2.0 * np.log(255.0)))


@dataclass
class SplatBatch:
    """Screen-space splats for the subset of Gaussians surviving culling."""

    means2d: np.ndarray  # (M, 2) pixel coords
    cov2d: np.ndarray  # (M, 3) packed symmetric [s00, s01, s11]
    conics: np.ndarray  # (M, 3) packed inverse [a, b, c]
    depths: np.ndarray  # (M,) camera-space z
    radii: np.ndarray  # (M,) footprint radius in pixels
    opacities: np.ndarray  # (M,)
    colors: np.ndarray  # (M, 3)
    semantics: np.ndarray  # (M, d_f)
    cam_xyz: np.ndarray  # (M, 3) camera-space means (retained for backward)
    source_index: np.ndarray  # (M,) row into the input cloud
    culled_count: int

    def __len__(self):
        return self.means2d.shape[0]


def project(cloud: GaussianCloud, camera: Camera) -> SplatBatch:
    """Project a global-coordinate cloud; Gaussians behind the near plane and
    splats whose footprint misses the image are culled silently."""
    n = len(cloud)
    rot, cam_pos = camera.world_to_camera()
    f = camera.focal
    cx, cy = camera.width / 2.0, camera.height / 2.0

    if n == 0:
        empty = np.zeros((0,))
        return SplatBatch(
            means2d=np.zeros((0, 2)), cov2d=np.zeros((0, 3)), conics=np.zeros((0, 3)),
            depths=empty, radii=empty, opacities=empty, colors=np.zeros((0, 3)),
            semantics=np.zeros((0, cloud.feature_dim)), cam_xyz=np.zeros((0, 3)),
            source_index=np.zeros(0, dtype=np.int64), culled_count=0,
        )

    cam_xyz = (cloud.means - cam_pos) @ rot.T
    in_front = cam_xyz[:, 2] > camera.near

    idx = np.nonzero(in_front)[0]
    xyz = cam_xyz[idx]
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    inv_z = 1.0 / z

    u = f * x * inv_z + cx
    v = f * y * inv_z + cy

    # cov2d = A Sigma A^T with A = J @ rot (2x3 per splat)
    sigma = covariance_from_factors(cloud.scales[idx], cloud.quats[idx])
    jac = np.zeros((len(idx), 2, 3))
    jac[:, 0, 0] = f * inv_z
    jac[:, 0, 2] = -f * x * inv_z**2
    jac[:, 1, 1] = f * inv_z
    jac[:, 1, 2] = -f * y * inv_z**2
    a_mat = jac @ rot[None, :, :]
    cov2d_full = a_mat @ sigma @ np.swapaxes(a_mat, 1, 2)
    s00 = cov2d_full[:, 0, 0] + COV2D_REG
    s01 = cov2d_full[:, 0, 1]
    s11 = cov2d_full[:, 1, 1] + COV2D_REG

    det = s00 * s11 - s01 * s01
    inv_det = 1.0 / det
    conic = np.stack([s11 * inv_det, -s01 * inv_det, s00 * inv_det], axis=1)

    mid = 0.5 * (s00 + s11)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radii = FOOTPRINT_SIGMA * np.sqrt(lam_max)

    on_screen = (
        (u + radii > 0.0)
        & (u - radii < camera.width)
        & (v + radii > 0.0)
        & (v - radii < camera.height)
    )
    keep = np.nonzero(on_screen)[0]
    idx = idx[keep]

    return SplatBatch(
        means2d=np.stack([u, v], axis=1)[keep],
        cov2d=np.stack([s00, s01, s11], axis=1)[keep],
        conics=conic[keep],
        depths=z[keep],
        radii=radii[keep],
        opacities=cloud.opacities[idx],
        colors=cloud.colors[idx],
        semantics=cloud.semantics[idx],
        cam_xyz=xyz[keep],
        source_index=idx,
        culled_count=n - len(idx),
    )
