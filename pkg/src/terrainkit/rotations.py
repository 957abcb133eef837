"""Small rotation helpers shared across the toolkit.

Quaternions are scalar-first ``(w, x, y, z)`` and must be unit length.
Poses are 7-vectors ``(px, py, pz, qw, qx, qy, qz)`` in world frame.
"""

from __future__ import annotations

import numpy as np

UNIT_QUAT_TOL = 1e-6


def quat_to_matrix(q):
    """Convert unit quaternions (..., 4) to rotation matrices (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[..., 0, 1] = 2.0 * (x * y - w * z)
    m[..., 0, 2] = 2.0 * (x * z + w * y)
    m[..., 1, 0] = 2.0 * (x * y + w * z)
    m[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[..., 1, 2] = 2.0 * (y * z - w * x)
    m[..., 2, 0] = 2.0 * (x * z - w * y)
    m[..., 2, 1] = 2.0 * (y * z + w * x)
    m[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return m


def quat_from_yaw(yaw):
    """Quaternion for a rotation of ``yaw`` radians about world +z."""
    half = 0.5 * float(yaw)
    return np.array([np.cos(half), 0.0, 0.0, np.sin(half)], dtype=np.float64)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * float(angle)
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * axis
    return q


def check_unit_quats(q, tol=UNIT_QUAT_TOL):
    """Raise ValueError unless every quaternion has unit norm within tol."""
    q = np.asarray(q, dtype=np.float64)
    norms = np.linalg.norm(q, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"quaternion norm deviates from 1 by {worst:g} (tol {tol:g})")


def split_poses(poses):
    """Split (N, 7) pose rows into positions (N, 3) and rotations (N, 3, 3)."""
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim == 1:
        poses = poses[None, :]
    if poses.shape[-1] != 7:
        raise ValueError(f"expected pose rows of length 7, got shape {poses.shape}")
    check_unit_quats(poses[:, 3:7])
    return poses[:, :3], quat_to_matrix(poses[:, 3:7])
