"""Uniform spatial hash over edge capsules for fast penetration queries.

Each detected edge segment becomes a capsule (finite cylinder with
hemispherical caps) of a fixed radius. Capsules are binned by their
axis-aligned bounding boxes into a regular grid over the padded bounds of
all edges, stored in CSR form so batched point queries stay allocation-free
inside the compiled kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .edges import as_segments

# zero-length sentinel disables test counting inside the query kernel
_NO_TESTS = np.zeros(0, dtype=np.int64)


@njit(cache=True)
def _query_kernel(seg_a, seg_b, radius, origin, inv_cell, dims, cell_start, entries, points, tests):
    n = points.shape[0]
    offsets = np.zeros((n, 3), dtype=np.float64)
    count_tests = tests.shape[0] == n
    ox = origin[0]
    oy = origin[1]
    oz = origin[2]
    sx = inv_cell[0]
    sy = inv_cell[1]
    sz = inv_cell[2]
    nx = dims[0]
    ny = dims[1]
    nz = dims[2]
    for i in range(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        cx = (px - ox) * sx
        cy = (py - oy) * sy
        cz = (pz - oz) * sz
        if cx < 0.0 or cy < 0.0 or cz < 0.0 or cx >= nx or cy >= ny or cz >= nz:
            continue  # outside the padded bounds: no capsule can reach
        ix = min(int(cx), nx - 1)
        iy = min(int(cy), ny - 1)
        iz = min(int(cz), nz - 1)
        cell = (ix * ny + iy) * nz + iz
        best_dist = np.inf
        bx = 0.0
        by = 0.0
        bz = 0.0
        for k in range(cell_start[cell], cell_start[cell + 1]):
            s = entries[k]
            if count_tests:
                tests[i] += 1
            ax = seg_a[s, 0]
            ay = seg_a[s, 1]
            az = seg_a[s, 2]
            dx = seg_b[s, 0] - ax
            dy = seg_b[s, 1] - ay
            dz = seg_b[s, 2] - az
            denom = dx * dx + dy * dy + dz * dz
            t = 0.0
            if denom > 1e-24:
                t = ((px - ax) * dx + (py - ay) * dy + (pz - az) * dz) / denom
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            qx = ax + t * dx
            qy = ay + t * dy
            qz = az + t * dz
            rx = px - qx
            ry = py - qy
            rz = pz - qz
            dist = np.sqrt(rx * rx + ry * ry + rz * rz)
            if dist < best_dist:
                best_dist = dist
                bx = rx
                by = ry
                bz = rz
        if best_dist < radius:
            depth = radius - best_dist
            if best_dist > 1e-15:
                scale = depth / best_dist
                offsets[i, 0] = bx * scale
                offsets[i, 1] = by * scale
                offsets[i, 2] = bz * scale
            else:
                offsets[i, 2] = depth  # point on the axis: push up
    return offsets


class CylinderGrid:
    """Immutable capsule grid; concurrent read queries are safe.

    Args:
        segments: (K, 2, 3) edge segments in meters.
        radius: capsule radius in meters.
        resolution: requested cells per axis; collapses to a single cell
            when all segments are coincident.
    """

    def __init__(self, segments, radius, resolution):
        segments = as_segments(segments)
        if len(segments) == 0:
            raise ValueError("cannot build a collision grid from an empty edge list")
        if radius <= 0.0:
            raise ValueError("capsule radius must be positive")
        resolution = int(resolution)
        if resolution < 1:
            raise ValueError("grid resolution must be >= 1")
        if resolution ** 3 > 2**27:
            raise ValueError(f"grid resolution {resolution} would allocate {resolution ** 3:,} cells")

        self.segments = segments
        self.radius = float(radius)
        self.resolution = resolution

        ends = segments.reshape(-1, 3)
        tight_lo, tight_hi = ends.min(axis=0), ends.max(axis=0)
        if np.all(tight_hi - tight_lo < 1e-6):
            dims = np.ones(3, dtype=np.int64)  # all edges effectively coincident
        else:
            dims = np.full(3, resolution, dtype=np.int64)
        lo = tight_lo - radius
        hi = tight_hi + radius
        cell = (hi - lo) / dims

        cap_lo = np.minimum(segments[:, 0], segments[:, 1]) - radius
        cap_hi = np.maximum(segments[:, 0], segments[:, 1]) + radius
        lo_idx = np.clip(np.floor((cap_lo - lo) / cell).astype(np.int64), 0, dims - 1)
        hi_idx = np.clip(np.floor((cap_hi - lo) / cell).astype(np.int64), 0, dims - 1)

        cell_ids = []
        cap_ids = []
        for k in range(len(segments)):
            rx = np.arange(lo_idx[k, 0], hi_idx[k, 0] + 1)
            ry = np.arange(lo_idx[k, 1], hi_idx[k, 1] + 1)
            rz = np.arange(lo_idx[k, 2], hi_idx[k, 2] + 1)
            ids = (
                (rx[:, None, None] * dims[1] + ry[None, :, None]) * dims[2]
                + rz[None, None, :]
            ).ravel()
            cell_ids.append(ids)
            cap_ids.append(np.full(len(ids), k, dtype=np.int32))
        cell_ids = np.concatenate(cell_ids)
        cap_ids = np.concatenate(cap_ids)
        order = np.lexsort((cap_ids, cell_ids))
        cell_ids = cell_ids[order]

        ncells = int(dims[0] * dims[1] * dims[2])
        self._origin = lo
        self._inv_cell = 1.0 / cell
        self._dims = dims
        self._entries = np.ascontiguousarray(cap_ids[order])
        self._cell_start = np.searchsorted(cell_ids, np.arange(ncells + 1)).astype(np.int64)
        self._seg_a = np.ascontiguousarray(segments[:, 0])
        self._seg_b = np.ascontiguousarray(segments[:, 1])

    @property
    def num_capsules(self):
        return len(self.segments)

    @property
    def dims(self):
        return tuple(int(d) for d in self._dims)

    def _check_points(self, points):
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {points.shape}")
        return points

    def query_offsets(self, points):
        """Penetration offsets (N, 3) for world points (N, 3).

        The offset is the minimum-norm translation moving a point out of its
        deepest-penetrating capsule; zero for points outside every capsule.
        """
        points = self._check_points(points)
        return _query_kernel(
            self._seg_a,
            self._seg_b,
            self.radius,
            self._origin,
            self._inv_cell,
            self._dims,
            self._cell_start,
            self._entries,
            points,
            _NO_TESTS,
        )

    def query_stats(self, points):
        """Like :meth:`query_offsets`, also returning per-point capsule test counts."""
        points = self._check_points(points)
        tests = np.zeros(len(points), dtype=np.int64)
        offsets = _query_kernel(
            self._seg_a,
            self._seg_b,
            self.radius,
            self._origin,
            self._inv_cell,
            self._dims,
            self._cell_start,
            self._entries,
            points,
            tests,
        )
        return offsets, tests

    def penetration_depths(self, points):
        """Scalar penetration depths r - dist, clamped at zero."""
        return np.linalg.norm(self.query_offsets(points), axis=1)


def build_collision_grid(segments, radius, resolution) -> CylinderGrid:
    """Construct the capsule grid for detected edge segments."""
    return CylinderGrid(segments, radius, resolution)
