"""Pinhole camera model and per-pixel ray generation.

Camera frame convention (OpenCV style): +z forward, +x right, +y down.
The principal axis in world frame is the rotation applied to +z. Rays are
sampled at pixel centers (column + 0.5, row + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import quat_to_matrix

_FORWARD = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics (pixels) plus world pose."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("camera resolution must be at least 1x1")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(3))
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise ValueError("camera rotation must be orthonormal")
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def from_fov(cls, width, height, hfov, vfov=None, position=(0.0, 0.0, 0.0), rotation=None):
        """Build intrinsics from fields of view in radians.

        When ``vfov`` is omitted, pixels are square (fy = fx).
        """
        if not 0.0 < hfov < np.pi:
            raise ValueError("hfov must be in (0, pi)")
        fx = (width / 2.0) / np.tan(hfov / 2.0)
        if vfov is None:
            fy = fx
        else:
            if not 0.0 < vfov < np.pi:
                raise ValueError("vfov must be in (0, pi)")
            fy = (height / 2.0) / np.tan(vfov / 2.0)
        return cls(
            width=int(width),
            height=int(height),
            fx=float(fx),
            fy=float(fy),
            cx=width / 2.0,
            cy=height / 2.0,
            position=np.asarray(position, dtype=np.float64),
            rotation=np.eye(3) if rotation is None else rotation,
        )

    @classmethod
    def looking(cls, width, height, hfov, position, forward, up_hint=(0.0, 0.0, 1.0), vfov=None):
        """Camera at ``position`` with its principal axis along ``forward``."""
        z = np.asarray(forward, dtype=np.float64)
        z = z / np.linalg.norm(z)
        up = np.asarray(up_hint, dtype=np.float64)
        if abs(np.dot(up / np.linalg.norm(up), z)) > 1.0 - 1e-9:
            up = np.array([1.0, 0.0, 0.0])
        y = -(up - np.dot(up, z) * z)  # image "up" maps to camera -y
        y = y / np.linalg.norm(y)
        x = np.cross(y, z)
        rot = np.stack([x, y, z], axis=1)
        return cls.from_fov(width, height, hfov, vfov=vfov, position=position, rotation=rot)

    @classmethod
    def with_pose7(cls, base, pose):
        """Copy of ``base`` repositioned to a (7,) position+quaternion pose."""
        pose = np.asarray(pose, dtype=np.float64).reshape(7)
        return cls(
            width=base.width,
            height=base.height,
            fx=base.fx,
            fy=base.fy,
            cx=base.cx,
            cy=base.cy,
            position=pose[:3],
            rotation=quat_to_matrix(pose[3:7]),
        )

    @property
    def forward(self):
        """Principal axis n_c in world frame (unit)."""
        return self.rotation @ _FORWARD


def ray_directions(cam: CameraModel):
    """World-frame unit ray directions (H, W, 3) through every pixel center."""
    u = (np.arange(cam.width, dtype=np.float64) + 0.5 - cam.cx) / cam.fx
    v = (np.arange(cam.height, dtype=np.float64) + 0.5 - cam.cy) / cam.fy
    dx, dy = np.meshgrid(u, v)
    d = np.stack([dx, dy, np.ones_like(dx)], axis=-1)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return d @ cam.rotation.T
