"""Foot volume points, penetration penalties, and the landing-area metric.

Volume points are fixed probes distributed inside a foot's collision box,
expressed as offsets in the foot frame. All batched operations are pure
functions of immutable inputs and return bit-identical results for
identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capsules import CylinderGrid
from .rotations import split_poses

# Stability constant added to point speeds inside the penetration penalty.
PENALTY_EPS = 1e-3


@dataclass(frozen=True)
class PenaltyConfig:
    eps: float = PENALTY_EPS

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class VolumePointSet:
    """Probe points inside a foot collision box.

    points: (P, 3) offsets in the foot frame, meters.
    box: (length, width, height) of the foot collision box, meters.
    """

    points: np.ndarray
    box: tuple

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", points)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must be (P, 3), got {points.shape}")
        if len(points) < 4:
            raise ValueError("a volume point set needs at least 4 points")
        half = np.asarray(self.box, dtype=np.float64) / 2.0
        if np.any(np.abs(points) > half + 1e-12):
            raise ValueError("volume points must lie inside the foot box")
        points.setflags(write=False)

    @classmethod
    def grid(cls, box=(0.2, 0.1, 0.05), shape=(5, 3, 2)):
        """Uniform grid of probes spanning the box, corners included."""
        axes = [
            (np.linspace(-0.5, 0.5, int(n)) if n > 1 else np.zeros(1)) * d
            for n, d in zip(shape, box)
        ]
        xx, yy, zz = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
        return cls(points=pts, box=tuple(float(d) for d in box))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class FootState:
    """World pose and twist of one foot frame.

    position (3,) m; quaternion (4,) scalar-first; linear_velocity (3,) m/s;
    angular_velocity (3,) rad/s.
    """

    position: np.ndarray
    quaternion: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray

    def pose7(self):
        return np.concatenate([np.asarray(self.position, np.float64), np.asarray(self.quaternion, np.float64)])

    def twist6(self):
        return np.concatenate(
            [np.asarray(self.linear_velocity, np.float64), np.asarray(self.angular_velocity, np.float64)]
        )


def world_points(poses, pts: VolumePointSet):
    """Transform probe offsets into world frame for (N, 7) poses -> (N, P, 3)."""
    pos, rot = split_poses(poses)
    return pos[:, None, :] + np.einsum("nij,pj->npi", rot, pts.points)


def point_velocities(poses, twists, pts: VolumePointSet):
    """Rigid-body point velocities v + w x (R p) for (N, 6) twists -> (N, P, 3)."""
    twists = np.asarray(twists, dtype=np.float64)
    if twists.ndim == 1:
        twists = twists[None, :]
    if twists.shape[-1] != 6:
        raise ValueError(f"expected twist rows of length 6, got shape {twists.shape}")
    _, rot = split_poses(poses)
    lever = np.einsum("nij,pj->npi", rot, pts.points)
    return twists[:, None, :3] + np.cross(twists[:, None, 3:], lever)


def query_penetrations(grid: CylinderGrid, poses, pts: VolumePointSet):
    """Penetration offsets (N, P, 3) of every probe against the capsule grid."""
    wp = world_points(poses, pts)
    n, p, _ = wp.shape
    return grid.query_offsets(wp.reshape(n * p, 3)).reshape(n, p, 3)


def rvol_penalty(offsets, velocities, cfg: PenaltyConfig = PenaltyConfig()):
    """Volumetric penetration penalty, -sum_i ||d_i|| * (||v_i|| + eps).

    ``offsets`` and ``velocities`` are (..., P, 3); the sum runs over the
    trailing point axis, so batched inputs return one penalty per row. The
    result is <= 0 and equals 0 exactly when no point penetrates.
    """
    offsets = np.asarray(offsets, dtype=np.float64)
    velocities = np.asarray(velocities, dtype=np.float64)
    if offsets.shape != velocities.shape:
        raise ValueError(f"offsets {offsets.shape} and velocities {velocities.shape} must match")
    depth = np.linalg.norm(offsets, axis=-1)
    speed = np.linalg.norm(velocities, axis=-1)
    # + 0.0 turns the -0.0 of an all-zero sum into a clean zero
    return -np.sum(depth * (speed + cfg.eps), axis=-1) + 0.0


def foot_penalty(grid: CylinderGrid, poses, twists, pts: VolumePointSet, cfg: PenaltyConfig = PenaltyConfig()):
    """Penetration offsets, point velocities, and r_vol for a batch of feet."""
    offsets = query_penetrations(grid, poses, pts)
    vels = point_velocities(poses, twists, pts)
    return offsets, vels, rvol_penalty(offsets, vels, cfg)


# Rays for the landing-area test start slightly above each probe so probes
# resting exactly on the surface still register a hit.
_RAY_LIFT = 1e-3


def landing_area(bvh, pose, pts: VolumePointSet, support_tolerance=0.01):
    """Fraction of volume points supported by terrain directly beneath.

    A point counts as supported when its downward ray hits terrain no lower
    than ``support_tolerance`` below the foot's lowest probe, i.e. the
    surface under the point is level with the sole. Points whose rays miss
    count as unsupported.
    """
    wp = world_points(pose, pts)
    if wp.shape[0] != 1:
        raise ValueError("landing_area evaluates a single foot state")
    wp = wp[0]
    sole_z = wp[:, 2].min()
    origins = wp + np.array([0.0, 0.0, _RAY_LIFT])
    dirs = np.broadcast_to(np.array([0.0, 0.0, -1.0]), origins.shape)
    t, _ = bvh.raycast(origins, dirs)
    hit = np.isfinite(t)
    hit_z = origins[:, 2] - t
    supported = hit & (hit_z >= sole_z - support_tolerance)
    return float(np.count_nonzero(supported)) / float(len(pts))
