"""Procedural test terrains.

All generators produce open terrain sheets (not solids) in a z-up world
frame with x as the walking direction. Faces are wound counter-clockwise
seen from above so normals point up/outward. Generated meshes share
vertices at fold lines, so adjacency and edge detection work without
relying on the vertex welding pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import MeshError, TriMesh

TERRAIN_KINDS = ("flat", "stairs", "gap", "box", "rough", "slope")


@dataclass(frozen=True)
class TerrainSpec:
    """Terrain kind plus per-kind dimension overrides (meters / counts)."""

    kind: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TERRAIN_KINDS:
            raise MeshError(f"unsupported terrain kind {self.kind!r}")
        for name, value in self.parameters.items():
            if name == "seed":
                continue
            if not np.isfinite(value) or value <= 0:
                raise MeshError(f"terrain parameter {name!r} must be strictly positive")


class _SheetBuilder:
    """Accumulates quads with exact shared-vertex indexing."""

    def __init__(self):
        self.vertices = []
        self.faces = []
        self._index = {}

    def vertex(self, x, y, z):
        key = (round(x, 12), round(y, 12), round(z, 12))
        i = self._index.get(key)
        if i is None:
            i = len(self.vertices)
            self._index[key] = i
            self.vertices.append((x, y, z))
        return i

    def quad(self, p00, p10, p11, p01):
        """Two triangles for corners in counter-clockwise order."""
        a = self.vertex(*p00)
        b = self.vertex(*p10)
        c = self.vertex(*p11)
        d = self.vertex(*p01)
        self.faces.append((a, b, c))
        self.faces.append((a, c, d))

    def build(self):
        return TriMesh.from_arrays(
            np.asarray(self.vertices, dtype=np.float64),
            np.asarray(self.faces, dtype=np.int64),
            weld_tol=None,
        )


def flat_terrain(size_x=2.0, size_y=2.0):
    """Two-triangle horizontal plane at z=0 centered on the origin."""
    b = _SheetBuilder()
    hx, hy = size_x / 2.0, size_y / 2.0
    b.quad((-hx, -hy, 0.0), (hx, -hy, 0.0), (hx, hy, 0.0), (-hx, hy, 0.0))
    return b.build()


def stairs_terrain(num_steps=5, rise=0.15, run=0.30, width=2.0, platform=1.0):
    """Ascending staircase along +x with a flat lead-in and top landing.

    Every step contributes two fold lines across the width (riser base and
    riser top), each with a 90-degree dihedral; the sheet has no other
    interior sharp edges.
    """
    num_steps = int(num_steps)
    if num_steps < 1:
        raise MeshError("stairs need at least one step")
    b = _SheetBuilder()
    y0, y1 = -width / 2.0, width / 2.0

    def strip(x0, z0, x1, z1):
        b.quad((x0, y0, z0), (x1, y0, z1), (x1, y1, z1), (x0, y1, z0))

    strip(0.0, 0.0, platform, 0.0)
    x = platform
    for i in range(num_steps):
        z_lo, z_hi = i * rise, (i + 1) * rise
        strip(x, z_lo, x, z_hi)  # riser (vertical)
        x_next = x + run + (platform if i == num_steps - 1 else 0.0)
        strip(x, z_hi, x_next, z_hi)  # tread (last one extends into the landing)
        x = x_next
    return b.build()


def gap_terrain(gap_width=0.5, depth=0.5, platform=2.0, width=2.0):
    """Two platforms at z=0 separated by a rectangular trench."""
    b = _SheetBuilder()
    y0, y1 = -width / 2.0, width / 2.0

    def strip(x0, z0, x1, z1):
        b.quad((x0, y0, z0), (x1, y0, z1), (x1, y1, z1), (x0, y1, z0))

    xa, xb = platform, platform + gap_width
    strip(0.0, 0.0, xa, 0.0)
    strip(xa, 0.0, xa, -depth)
    strip(xa, -depth, xb, -depth)
    strip(xb, -depth, xb, 0.0)
    strip(xb, 0.0, xb + platform, 0.0)
    return b.build()


def box_terrain(box_length=1.0, box_width=1.0, height=0.3, ground=4.0):
    """A raised box platform centered on a square ground sheet.

    The ground is modeled as a ring of quads around the box footprint so the
    base perimeter shares vertices with the walls.
    """
    if box_length >= ground or box_width >= ground:
        raise MeshError("box footprint must fit inside the ground sheet")
    b = _SheetBuilder()
    g = ground / 2.0
    hx, hy = box_length / 2.0, box_width / 2.0
    xs = [-g, -hx, hx, g]
    ys = [-g, -hy, hy, g]
    for i in range(3):
        for j in range(3):
            if i == 1 and j == 1:
                continue  # box footprint
            b.quad(
                (xs[i], ys[j], 0.0),
                (xs[i + 1], ys[j], 0.0),
                (xs[i + 1], ys[j + 1], 0.0),
                (xs[i], ys[j + 1], 0.0),
            )
    # walls, outward-facing
    b.quad((-hx, -hy, 0.0), (hx, -hy, 0.0), (hx, -hy, height), (-hx, -hy, height))  # -y
    b.quad((hx, -hy, 0.0), (hx, hy, 0.0), (hx, hy, height), (hx, -hy, height))  # +x
    b.quad((hx, hy, 0.0), (-hx, hy, 0.0), (-hx, hy, height), (hx, hy, height))  # +y
    b.quad((-hx, hy, 0.0), (-hx, -hy, 0.0), (-hx, -hy, height), (-hx, hy, height))  # -x
    # top
    b.quad((-hx, -hy, height), (hx, -hy, height), (hx, hy, height), (-hx, hy, height))
    return b.build()


def rough_terrain(size=4.0, cells=32, amplitude=0.05, seed=0):
    """Random heightfield sheet; deterministic for a fixed seed."""
    cells = int(cells)
    rng = np.random.default_rng(seed)
    n = cells + 1
    coords = np.linspace(-size / 2.0, size / 2.0, n)
    z = amplitude * (2.0 * rng.random((n, n)) - 1.0)
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    vertices = np.stack([xx.ravel(), yy.ravel(), z.ravel()], axis=1)
    idx = np.arange(n * n).reshape(n, n)
    a = idx[:-1, :-1].ravel()
    bq = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    faces = np.concatenate([np.stack([a, bq, c], 1), np.stack([a, c, d], 1)])
    return TriMesh.from_arrays(vertices, faces, weld_tol=None)


def slope_terrain(angle=np.pi / 6, run=2.0, platform=2.0, width=2.0):
    """Flat lead-in, straight incline, flat landing; fold dihedrals equal ``angle``."""
    if not 0 < angle < np.pi / 2:
        raise MeshError("slope angle must be in (0, pi/2)")
    b = _SheetBuilder()
    y0, y1 = -width / 2.0, width / 2.0
    top = run * np.tan(angle)

    def strip(x0, z0, x1, z1):
        b.quad((x0, y0, z0), (x1, y0, z1), (x1, y1, z1), (x0, y1, z0))

    strip(0.0, 0.0, platform, 0.0)
    strip(platform, 0.0, platform + run, top)
    strip(platform + run, top, platform + run + platform, top)
    return b.build()


_GENERATORS = {
    "flat": flat_terrain,
    "stairs": stairs_terrain,
    "gap": gap_terrain,
    "box": box_terrain,
    "rough": rough_terrain,
    "slope": slope_terrain,
}


def generate_terrain(spec: TerrainSpec) -> TriMesh:
    """Build the procedural terrain described by ``spec``."""
    gen = _GENERATORS.get(spec.kind)
    if gen is None:
        raise MeshError(f"unsupported terrain kind {spec.kind!r}")
    return gen(**spec.parameters)
