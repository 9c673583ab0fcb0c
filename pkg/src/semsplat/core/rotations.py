"""Quaternion and rotation-matrix utilities (wxyz convention, scalar first).

All functions accept either a single quaternion of shape (4,) or a batch of
shape (N, 4). Rotation construction normalizes its input, so gradients taken
with respect to raw quaternion components must chain through
`normalize_backward`.
"""
from __future__ import annotations

import numpy as np


def normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    return q / n


def normalize_backward(q_raw, grad_unit):
    """Chain a gradient w.r.t. the unit quaternion back to the raw one.

    q_hat = q / |q|  =>  d q_hat / d q = (I - q_hat q_hat^T) / |q|
    """
    q_raw = np.asarray(q_raw, dtype=np.float64)
    n = np.linalg.norm(q_raw, axis=-1, keepdims=True)
    q_hat = q_raw / n
    dot = np.sum(grad_unit * q_hat, axis=-1, keepdims=True)
    return (grad_unit - dot * q_hat) / n


def quat_to_matrix(q):
    """Rotation matrix from quaternion(s); input is normalized first."""
    q = normalize(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_to_matrix_grad_unit(q_unit, grad_matrix):
    """Gradient of the matrix entries w.r.t. the four quaternion components.

    Uses the polynomial form of quat_to_matrix evaluated at `q_unit` and does
    NOT chain through normalization; callers combining several paths apply
    `normalize_backward` once at the end.
    """
    q = np.asarray(q_unit, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    g = grad_matrix

    zeros = np.zeros_like(w)

    def pack(rows):
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    dw = pack([[zeros, -z, y], [z, zeros, -x], [-y, x, zeros]]) * 2
    dx = pack([[zeros, y, z], [y, -2 * x, -w], [z, w, -2 * x]]) * 2
    dy = pack([[-2 * y, x, w], [x, zeros, z], [-w, z, -2 * y]]) * 2
    dz = pack([[-2 * z, -w, x], [w, -2 * z, y], [x, y, zeros]]) * 2

    return np.stack(
        [np.sum(g * d, axis=(-2, -1)) for d in (dw, dx, dy, dz)], axis=-1
    )


def quat_to_matrix_backward(q_raw, grad_matrix):
    """Gradient of quat_to_matrix w.r.t. the *raw* (unnormalized) quaternion.

    grad_matrix has shape (..., 3, 3); returns shape (..., 4).
    """
    q_raw = np.asarray(q_raw, dtype=np.float64)
    grad_unit = quat_to_matrix_grad_unit(normalize(q_raw), grad_matrix)
    return normalize_backward(q_raw, grad_unit)


def quat_multiply(a, b):
    """Hamilton product a ⊗ b (both wxyz)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_left_matrix(q):
    """L(q) with q ⊗ p = L(q) @ p."""
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ],
        dtype=np.float64,
    )


def quat_right_matrix(q):
    """R(q) with p ⊗ q = R(q) @ p."""
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ],
        dtype=np.float64,
    )


def quat_conjugate(q):
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_from_axis_angle(axis, angle_rad):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle_rad
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_from_euler_xyz_degrees(euler_deg):
    """Quaternion for R = Rz @ Ry @ Rx (extrinsic x-y-z rotation order)."""
    ex, ey, ez = np.asarray(euler_deg, dtype=np.float64)
    qx = quat_from_axis_angle([1.0, 0.0, 0.0], np.deg2rad(ex))
    qy = quat_from_axis_angle([0.0, 1.0, 0.0], np.deg2rad(ey))
    qz = quat_from_axis_angle([0.0, 0.0, 1.0], np.deg2rad(ez))
    return quat_multiply(qz, quat_multiply(qy, qx))


def identity_quat():
    return np.array([1.0, 0.0, 0.0, 0.0])
