"""Flat-patch target sampling and position-based velocity commands.

Navigation targets are sampled on level terrain only: a candidate location
is accepted when downward rays over a disk of the patch radius all hit and
their height spread stays below the flatness threshold. Commands steer the
robot toward a target expressed in its base frame with proportional gains,
clipped to terrain-dependent limits; lateral velocity is always zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .bvh import TriangleBVH
from .rotations import split_poses


class PatchSamplingError(RuntimeError):
    """Raised when the attempt budget runs out before enough patches are found."""


@dataclass(frozen=True)
class PatchConfig:
    """Flat-patch acceptance parameters.

    radius: disk radius checked around each candidate, meters.
    max_height_diff: maximum allowed max(H) - min(H) over the disk, meters.
    n_targets: number of patches to sample.
    rings / ring_points: disk ray pattern, center + rings x ring_points rays.
    max_attempts: total candidate budget (None = 1000 per target).
    """

    radius: float = 0.3
    max_height_diff: float = 0.05
    n_targets: int = 16
    rings: int = 2
    ring_points: int = 8
    max_attempts: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.radius <= 0.0 or self.max_height_diff <= 0.0:
            raise ValueError("radius and max_height_diff must be positive")
        if self.n_targets < 1:
            raise ValueError("n_targets must be >= 1")
        if self.samples_per_check < 4:
            raise ValueError("disk pattern needs at least 4 rays")

    @property
    def samples_per_check(self):
        return 1 + self.rings * self.ring_points


@dataclass(frozen=True)
class FlatPatch:
    """Accepted target location; z is the mean of the sampled disk heights."""

    center: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))


def disk_offsets(radius, rings, ring_points):
    """Concentric-ring sample offsets (center first), shape (1 + rings*ring_points, 2)."""
    offsets = [(0.0, 0.0)]
    for ring in range(1, rings + 1):
        r = radius * ring / rings
        for k in range(ring_points):
            a = 2.0 * np.pi * k / ring_points
            offsets.append((r * np.cos(a), r * np.sin(a)))
    return np.asarray(offsets, dtype=np.float64)


def patch_heights(bvh: TriangleBVH, xy, cfg: PatchConfig, densify=1):
    """Disk heights around (x, y); NaN rows mean a ray missed the terrain."""
    offs = disk_offsets(cfg.radius, cfg.rings * densify, cfg.ring_points * densify)
    return bvh.heights_at(np.asarray(xy, dtype=np.float64)[None, :] + offs)


def sample_flat_patches(bvh: TriangleBVH, cfg: PatchConfig, bounds) -> list[FlatPatch]:
    """Rejection-sample flat patches inside ``bounds`` ((x0, x1), (y0, y1)).

    A candidate is accepted when every disk ray hits the terrain and the
    height spread is below ``cfg.max_height_diff``. Raises
    :class:`PatchSamplingError` when the attempt budget is exhausted.
    """
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bounds must span a positive area")
    rng = np.random.default_rng(cfg.seed)
    budget = cfg.max_attempts if cfg.max_attempts is not None else 1000 * cfg.n_targets
    patches: list[FlatPatch] = []
    attempts = 0
    while len(patches) < cfg.n_targets:
        if attempts >= budget:
            raise PatchSamplingError(
                f"found {len(patches)}/{cfg.n_targets} flat patches in {attempts} attempts"
                f" (radius {cfg.radius} m, max height diff {cfg.max_height_diff} m)"
            )
        attempts += 1
        xy = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        heights = patch_heights(bvh, xy, cfg)
        if np.any(np.isnan(heights)):
            continue  # holes count as non-flat
        if heights.max() - heights.min() < cfg.max_height_diff:
            patches.append(FlatPatch(np.array([xy[0], xy[1], heights.mean()])))
    return patches


def recheck_patches(bvh: TriangleBVH, patches, cfg: PatchConfig, densify=10):
    """Re-validate accepted patches with a ``densify``-times denser ray disk.

    Returns the boolean verdict per patch (True = still flat).
    """
    out = []
    for patch in patches:
        heights = patch_heights(bvh, patch.center[:2], cfg, densify=densify)
        ok = not np.any(np.isnan(heights)) and heights.max() - heights.min() < cfg.max_height_diff
        out.append(bool(ok))
    return np.asarray(out, dtype=bool)


def patches_array(patches):
    if len(patches) == 0:
        return np.empty((0, 3), dtype=np.float64)
    return np.stack([p.center for p in patches])


def default_patch_bounds(mesh, radius):
    """Mesh footprint shrunk by the patch radius; the CLI/server default."""
    lo, hi = mesh.bounds()
    return ((lo[0] + radius, hi[0] - radius), (lo[1] + radius, hi[1] - radius))


@dataclass(frozen=True)
class CommandConfig:
    """Gains (1/s), limits, and the flat-terrain turning fraction."""

    k_v: float = 1.0
    k_omega: float = 1.0
    v_max: float = 1.5  # m/s
    omega_max: float = 1.0  # rad/s
    turning_fraction: float = 0.0  # of flat-terrain agents

    def __post_init__(self):
        if self.k_v <= 0.0 or self.k_omega <= 0.0:
            raise ValueError("gains must be positive")
        if self.v_max <= 0.0 or self.omega_max <= 0.0:
            raise ValueError("limits must be positive")
        if not 0.0 <= self.turning_fraction <= 1.0:
            raise ValueError("turning_fraction must be in [0, 1]")


@dataclass(frozen=True)
class VelocityCommand:
    """Forward velocity, zero lateral velocity, and yaw rate."""

    v_x: float
    v_y: float
    omega_z: float

    def as_array(self):
        return np.array([self.v_x, self.v_y, self.omega_z], dtype=np.float64)


def velocity_command(target_in_base, cfg: CommandConfig) -> VelocityCommand:
    """Proportional command toward a target in the base frame, clipped.

    v_x = clip(k_v * x_g, 0, v_max); omega_z = clip(k_omega * atan2(y_g, x_g),
    -omega_max, omega_max); v_y is always 0. The degenerate target (0, 0)
    yields the zero command.
    """
    x_g, y_g = float(target_in_base[0]), float(target_in_base[1])
    if not (np.isfinite(x_g) and np.isfinite(y_g)):
        raise ValueError("target coordinates must be finite")
    heading = 0.0 if (x_g == 0.0 and y_g == 0.0) else np.arctan2(y_g, x_g)
    v_x = float(np.clip(cfg.k_v * x_g, 0.0, cfg.v_max))
    omega_z = float(np.clip(cfg.k_omega * heading, -cfg.omega_max, cfg.omega_max))
    return VelocityCommand(v_x=v_x, v_y=0.0, omega_z=omega_z)


def assign_commands(poses, patches, cfg: CommandConfig, rng=None, flat_mask=None):
    """Pick a navigation target per agent and derive its velocity command.

    Each agent receives a patch drawn uniformly from those ahead of it
    (positive x in its base frame), falling back to any patch. Agents in
    ``flat_mask`` (default: all) become pure turning agents with probability
    ``cfg.turning_fraction``: v_x = 0 and omega_z ~ U(-omega_max, omega_max),
    reported with target index -1.

    Returns (commands (N, 3), target_idx (N,)).
    """
    centers = patches_array(patches) if not isinstance(patches, np.ndarray) else patches
    if len(centers) == 0:
        raise ValueError("assign_commands needs a non-empty patch set")
    if rng is None:
        rng = np.random.default_rng()
    pos, rot = split_poses(poses)
    n = len(pos)
    flat_mask = np.ones(n, dtype=bool) if flat_mask is None else np.asarray(flat_mask, dtype=bool)
    turning = flat_mask & (rng.random(n) < cfg.turning_fraction)

    rel = np.einsum("nji,nkj->nki", rot, centers[None, :, :] - pos[:, None, :])
    commands = np.zeros((n, 3), dtype=np.float64)
    target_idx = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if turning[i]:
            commands[i, 2] = rng.uniform(-cfg.omega_max, cfg.omega_max)
            continue
        ahead = np.flatnonzero(rel[i, :, 0] > 0.0)
        choice = int(rng.choice(ahead)) if len(ahead) else int(rng.integers(0, len(centers)))
        cmd = velocity_command(rel[i, choice, :2], cfg)
        commands[i] = (cmd.v_x, cmd.v_y, cmd.omega_z)
        target_idx[i] = choice
    return commands, target_idx


def style_reward(d_value):
    """AMP-style scalar map max(0, 1 - 0.25 * (D - 1)^2); in [0, 1], peak at D=1."""
    d_value = np.asarray(d_value, dtype=np.float64)
    out = np.maximum(0.0, 1.0 - 0.25 * (d_value - 1.0) ** 2)
    return float(out) if out.ndim == 0 else out


def pd_torque(action, q, qdot, k_p, k_d):
    """Joint torques k_p * (action - q) - k_d * qdot (elementwise)."""
    action = np.asarray(action, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    qdot = np.asarray(qdot, dtype=np.float64)
    if action.shape != q.shape or q.shape != qdot.shape:
        raise ValueError("action, q, and qdot must share one shape")
    for gain in (k_p, k_d):
        g = np.asarray(gain)
        if g.ndim and g.shape != q.shape:
            raise ValueError("gain vectors must match the joint dimension")
    return k_p * (action - q) - k_d * qdot


def write_patches_json(patches, path):
    """JSON array of [x, y, z] patch centers."""
    arr = patches_array(patches) if not isinstance(patches, np.ndarray) else patches
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([[float(v) for v in row] for row in arr], fh)


def read_patches_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return np.asarray(data, dtype=np.float64).reshape(-1, 3)


def write_command_trace(path, rows):
    """CSV command trace with columns t, v_x, omega_z, target_id."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "v_x", "omega_z", "target_id"])
        for t, v_x, omega_z, target_id in rows:
            writer.writerow([t, repr(float(v_x)), repr(float(omega_z)), int(target_id)])
