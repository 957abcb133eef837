"""Depth image rendering against scene geometry.

Rendering casts one ray per pixel center and records the radial distance to
the first intersection; physical RGB-D sensors report orthogonal depth, so
the radial grid is projected onto the camera's principal axis afterwards.
Images are float32 row-major with a per-pixel validity flag; missed pixels
are invalid and carry +inf until a pipeline assigns its far clip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import TriangleBVH
from .camera import CameraModel, ray_directions

UNIT_METERS = "m"
UNIT_NORMALIZED = "normalized"


@dataclass
class DepthImage:
    """(H, W) float32 depth values with validity flags and a unit tag."""

    values: np.ndarray
    valid: np.ndarray
    unit: str = UNIT_METERS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.valid is None:
            self.valid = np.ones(self.values.shape, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2 or self.valid.shape != self.values.shape:
            raise ValueError("values must be (H, W) with a matching valid mask")
        if self.unit not in (UNIT_METERS, UNIT_NORMALIZED):
            raise ValueError(f"unknown depth unit {self.unit!r}")

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    def copy(self):
        return DepthImage(self.values.copy(), self.valid.copy(), self.unit)


def raycast_radial(bvh: TriangleBVH, cam: CameraModel) -> DepthImage:
    """Radial distance image: nearest ray-triangle hit per pixel center.

    Misses are flagged invalid with value +inf.
    """
    dirs = ray_directions(cam).reshape(-1, 3)
    origins = np.broadcast_to(cam.position, dirs.shape)
    t, _ = bvh.raycast(origins, dirs)
    t = t.reshape(cam.height, cam.width)
    valid = np.isfinite(t)
    return DepthImage(values=t.astype(np.float32), valid=valid, unit=UNIT_METERS)


def radial_to_orthogonal(img: DepthImage, cam: CameraModel) -> DepthImage:
    """Project radial distances onto the principal axis: z = d * (v . n).

    Invalid pixels stay invalid with their value unchanged.
    """
    if (img.height, img.width) != (cam.height, cam.width):
        raise ValueError(
            f"image {img.height}x{img.width} does not match camera {cam.height}x{cam.width}"
        )
    cosines = ray_directions(cam) @ cam.forward
    values = img.values.copy()
    values[img.valid] = (img.values[img.valid].astype(np.float64) * cosines[img.valid]).astype(
        np.float32
    )
    return DepthImage(values=values, valid=img.valid.copy(), unit=img.unit)


def render_depth(bvh: TriangleBVH, cam: CameraModel) -> DepthImage:
    """Radial cast followed by the orthogonal projection (sensor emulation)."""
    return radial_to_orthogonal(raycast_radial(bvh, cam), cam)


def save_depth(img: DepthImage, stem) -> None:
    """Write ``<stem>.json`` metadata plus raw little-endian ``<stem>.f32``.

    Payload is row-major float32. In metric images invalid pixels are stored
    as -1; normalized images are dense in [0, 1].
    """
    stem = Path(stem)
    meta = {"width": img.width, "height": img.height, "unit": img.unit}
    stem.with_suffix(".json").write_text(json.dumps(meta), encoding="utf-8")
    values = img.values.astype("<f4").copy()
    if img.unit == UNIT_METERS:
        values[~img.valid] = -1.0
    stem.with_suffix(".f32").write_bytes(values.tobytes())


def load_depth(stem) -> DepthImage:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    raw = stem.with_suffix(".f32").read_bytes()
    values = np.frombuffer(raw, dtype="<f4", count=meta["width"] * meta["height"])
    values = values.reshape(meta["height"], meta["width"]).copy()
    if meta["unit"] == UNIT_METERS:
        valid = values >= 0.0
        values[~valid] = np.inf
    else:
        valid = np.ones_like(values, dtype=bool)
    return DepthImage(values=values, valid=valid, unit=meta["unit"])
