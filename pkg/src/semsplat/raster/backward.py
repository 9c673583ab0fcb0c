"""Reverse-mode gradients of the tiled compositing forward pass.

Within a pixel, with w_i = alpha_i * T_i and T_i = prod_{j<i} (1 - alpha_j):

    dL/dpayload_i = w_i * g                      (g = payload-space gradient)
    dL/dalpha_i   = T_i * phi_i - U_i / (1 - alpha_i)

where phi_i = <g, payload_i> + g_A and U_i = sum_{j>i} w_j * phi_j picks up
the attenuation every later contributor suffers from alpha_i. U is a suffix
sum along the depth axis, so each tile's whole backward collapses into a few
batched array operations mirroring the forward cumprod. The per-splat
screen-space gradients are then chained through the conic, the projection
Jacobian, and the covariance factorization in one vectorized pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semsplat.core import rotations
from semsplat.core.compose import covariance_from_factors
from semsplat.errors import InvalidStateError
from semsplat.raster.forward import RenderOutput


@dataclass
class RenderGradients:
    """Per-Gaussian parameter gradients plus view-space bookkeeping."""

    means: np.ndarray
    scales: np.ndarray
    quats: np.ndarray
    opacities: np.ndarray
    colors: np.ndarray
    semantics: np.ndarray
    mean2d: np.ndarray  # (N, 2) screen-space mean gradients (densify stats)
    visibility: np.ndarray  # (N,) bool: contributed to some pixel
    max_radii_px: np.ndarray  # (N,) splat footprint radius, 0 if culled
    transforms: dict = field(default_factory=dict)  # object k -> TransformGradients

    def assert_finite(self):
        for name in ("means", "scales", "quats", "opacities", "colors",
                     "semantics", "mean2d"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite gradient in {name}")


def render_backward(output: RenderOutput, d_color=None, d_semantic=None,
                    d_alpha=None) -> RenderGradients:
    state = output.retained
    if state is None:
        raise InvalidStateError("render was not called with retain=True")
    splats = state.splats
    n = state.n_gaussians
    d_f = state.feature_dim
    m = len(splats)
    height, width = state.camera.height, state.camera.width
    tmin = state.transmittance_min

    g_payload = np.zeros((height, width, 3 + d_f))
    if d_color is not None:
        g_payload[:, :, :3] = d_color
    if d_semantic is not None:
        g_payload[:, :, 3:] = d_semantic
    g_alpha = np.zeros((height, width)) if d_alpha is None else np.asarray(d_alpha)

    d_payload = np.zeros((m, 3 + d_f))
    d_opacity = np.zeros(m)
    d_conic = np.zeros((m, 3))  # full-matrix entries (0,0), (0,1)=(1,0), (1,1)
    d_mean2d = np.zeros((m, 2))
    touched = np.zeros(m, dtype=bool)

    for rec in state.tiles:
        rows, alpha, t_before = rec.rows, rec.alpha, rec.t_before
        th, tw = alpha.shape[1:]
        g_block = g_payload[rec.y0 : rec.y0 + th, rec.x0 : rec.x0 + tw]
        ga_block = g_alpha[rec.y0 : rec.y0 + th, rec.x0 : rec.x0 + tw]

        active = t_before >= tmin
        weight = np.where(active, alpha * t_before, 0.0)
        phi = (
            np.tensordot(state.payload[rows], g_block, axes=([1], [2]))
            + ga_block[None, :, :]
        )
        d_payload_rows = np.tensordot(weight, g_block, axes=([1, 2], [0, 1]))

        contrib = weight * phi
        # U_i = sum_{j > i} w_j phi_j: exclusive suffix sum along depth
        suffix = contrib[::-1].cumsum(axis=0)[::-1]
        u_term = suffix - contrib
        # alpha == 1 zeroes every later weight, so U is exactly 0 there;
        # guard the division rather than the (correct) value.
        denom = np.where(alpha < 1.0, 1.0 - alpha, 1.0)
        d_alpha_px = np.where(
            active & (alpha > 0.0), t_before * phi - u_term / denom, 0.0
        )

        ops = splats.opacities[rows]
        gaussian_val = alpha / np.where(ops > 0, ops, 1.0)[:, None, None]
        d_opacity_rows = (gaussian_val * d_alpha_px).sum(axis=(1, 2))
        dq = -0.5 * alpha * d_alpha_px

        means = splats.means2d[rows]
        xs = np.arange(rec.x0, rec.x0 + tw) + 0.5
        ys = np.arange(rec.y0, rec.y0 + th) + 0.5
        dx = xs[None, :] - means[:, 0, None]  # (n, tw)
        dy = ys[None, :] - means[:, 1, None]  # (n, th)
        # dx is constant over rows and dy over columns, so the conic moments
        # reduce to row/column marginals of dq
        dq_y = dq.sum(axis=1)  # (n, tw)
        dq_x = dq.sum(axis=2)  # (n, th)
        sxx = (dq_y * dx * dx).sum(axis=1)
        syy = (dq_x * dy * dy).sum(axis=1)
        sxy = ((dq * dy[:, :, None]).sum(axis=1) * dx).sum(axis=1)
        sx = (dq_y * dx).sum(axis=1)
        sy = (dq_x * dy).sum(axis=1)
        ca, cb, cc = (splats.conics[rows, i] for i in range(3))

        np.add.at(d_payload, rows, d_payload_rows)
        np.add.at(d_opacity, rows, d_opacity_rows)
        np.add.at(d_conic, (rows, 0), sxx)
        np.add.at(d_conic, (rows, 1), sxy)
        np.add.at(d_conic, (rows, 2), syy)
        np.add.at(d_mean2d, (rows, 0), -2.0 * (ca * sx + cb * sy))
        np.add.at(d_mean2d, (rows, 1), -2.0 * (cb * sx + cc * sy))
        touched[rows] |= (weight > 0.0).any(axis=(1, 2))

    grads = _chain_to_parameters(
        state, d_payload, d_opacity, d_conic, d_mean2d, touched, n
    )
    grads.assert_finite()
    return grads


def _chain_to_parameters(state, d_payload, d_opacity, d_conic, d_mean2d, touched, n):
    splats = state.splats
    camera = state.camera
    d_f = state.feature_dim
    m = len(splats)
    rot, _ = camera.world_to_camera()
    f = camera.focal

    out = RenderGradients(
        means=np.zeros((n, 3)), scales=np.zeros((n, 3)), quats=np.zeros((n, 4)),
        opacities=np.zeros(n), colors=np.zeros((n, 3)), semantics=np.zeros((n, d_f)),
        mean2d=np.zeros((n, 2)), visibility=np.zeros(n, dtype=bool),
        max_radii_px=np.zeros(n),
    )
    if m:
        out.max_radii_px[splats.source_index] = splats.radii
    if not touched.any():
        return out

    rows = np.nonzero(touched)[0]
    src = splats.source_index[rows]

    # conic = inv(cov2d): d_cov2d = -conic @ d_conic @ conic
    conic_full = np.empty((len(rows), 2, 2))
    conic_full[:, 0, 0] = splats.conics[rows, 0]
    conic_full[:, 0, 1] = conic_full[:, 1, 0] = splats.conics[rows, 1]
    conic_full[:, 1, 1] = splats.conics[rows, 2]
    g_conic = np.empty((len(rows), 2, 2))
    g_conic[:, 0, 0] = d_conic[rows, 0]
    g_conic[:, 0, 1] = g_conic[:, 1, 0] = d_conic[rows, 1]
    g_conic[:, 1, 1] = d_conic[rows, 2]
    d_cov2d = -conic_full @ g_conic @ conic_full

    # cov2d = A sigma A^T + reg; A = J @ rot
    xyz = splats.cam_xyz[rows]
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    inv_z = 1.0 / z
    jac = np.zeros((len(rows), 2, 3))
    jac[:, 0, 0] = f * inv_z
    jac[:, 0, 2] = -f * x * inv_z**2
    jac[:, 1, 1] = f * inv_z
    jac[:, 1, 2] = -f * y * inv_z**2
    a_mat = jac @ rot[None, :, :]

    scales = state.cloud.scales[src]
    quats = state.cloud.quats[src]
    sigma = covariance_from_factors(scales, quats)

    d_sigma = np.swapaxes(a_mat, 1, 2) @ d_cov2d @ a_mat
    d_a = 2.0 * d_cov2d @ a_mat @ sigma
    d_jac = d_a @ rot.T[None, :, :]

    du = d_mean2d[rows, 0]
    dv = d_mean2d[rows, 1]
    d_x = d_jac[:, 0, 2] * (-f * inv_z**2) + du * f * inv_z
    d_y = d_jac[:, 1, 2] * (-f * inv_z**2) + dv * f * inv_z
    d_z = (
        (d_jac[:, 0, 0] + d_jac[:, 1, 1]) * (-f * inv_z**2)
        + d_jac[:, 0, 2] * (2.0 * f * x * inv_z**3)
        + d_jac[:, 1, 2] * (2.0 * f * y * inv_z**3)
        + du * (-f * x * inv_z**2)
        + dv * (-f * y * inv_z**2)
    )
    d_cam = np.stack([d_x, d_y, d_z], axis=1)
    d_means = d_cam @ rot  # rot^T applied row-wise

    # sigma = M M^T with M = R(q) diag(scale)
    rot_q = rotations.quat_to_matrix(quats)
    m_factor = rot_q * scales[:, None, :]
    d_m = 2.0 * d_sigma @ m_factor
    d_scales = np.einsum("mjk,mjk->mk", d_m, rot_q)
    d_rot_q = d_m * scales[:, None, :]
    d_quats = rotations.quat_to_matrix_backward(quats, d_rot_q)

    np.add.at(out.means, src, d_means)
    np.add.at(out.scales, src, d_scales)
    np.add.at(out.quats, src, d_quats)
    np.add.at(out.opacities, src, d_opacity[rows])
    np.add.at(out.colors, src, d_payload[rows, :3])
    np.add.at(out.semantics, src, d_payload[rows, 3:])
    np.add.at(out.mean2d, src, d_mean2d[rows])
    out.visibility[src] = True
    return out
