"""Bounding volume hierarchy over mesh triangles for closest-hit ray casts.

Binary BVH with median splits on the longest centroid axis, flattened into
arrays so the traversal kernel compiles with numba. Query results are
required to be identical to the exhaustive per-triangle test (the oracle in
:mod:`terrainkit.bench`); the tree only prunes, never changes, candidate
hits. The structure is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .mesh import TriMesh

# Nearest accepted hit distance; avoids self-intersection at the ray origin.
RAY_EPS = 1e-6
# Inclusive tolerance on barycentric coordinates so rays passing exactly
# through shared triangle edges cannot fall between both triangles.
BARY_TOL = 1e-9
# Determinant cutoff below which a ray counts as parallel to the triangle.
DET_EPS = 1e-14

_LEAF_SIZE = 4
_STACK_DEPTH = 128
# Node boxes are padded so grazing rays cannot be pruned by slab rounding.
_BOX_PAD = 1e-9


@njit(cache=True)
def _traverse_kernel(node_min, node_max, node_left, node_right, v0, e1, e2, tri_ids, origins, dirs):
    n = origins.shape[0]
    out_t = np.full(n, np.inf)
    out_tri = np.full(n, -1, dtype=np.int64)
    stack = np.empty(_STACK_DEPTH, dtype=np.int64)
    for i in range(n):
        ox = origins[i, 0]
        oy = origins[i, 1]
        oz = origins[i, 2]
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        dz = dirs[i, 2]
        ix = 1.0 / dx if abs(dx) > 1e-300 else (1e300 if dx >= 0 else -1e300)
        iy = 1.0 / dy if abs(dy) > 1e-300 else (1e300 if dy >= 0 else -1e300)
        iz = 1.0 / dz if abs(dz) > 1e-300 else (1e300 if dz >= 0 else -1e300)
        best_t = np.inf
        best_tri = -1
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            # slab test
            t1 = (node_min[node, 0] - ox) * ix
            t2 = (node_max[node, 0] - ox) * ix
            tmin = min(t1, t2)
            tmax = max(t1, t2)
            t1 = (node_min[node, 1] - oy) * iy
            t2 = (node_max[node, 1] - oy) * iy
            tmin = max(tmin, min(t1, t2))
            tmax = min(tmax, max(t1, t2))
            t1 = (node_min[node, 2] - oz) * iz
            t2 = (node_max[node, 2] - oz) * iz
            tmin = max(tmin, min(t1, t2))
            tmax = min(tmax, max(t1, t2))
            if tmax < tmin or tmax < RAY_EPS or tmin > best_t:
                continue
            left = node_left[node]
            if left < 0:  # leaf: test triangles
                start = -left - 1
                for k in range(start, start + node_right[node]):
                    ax = v0[k, 0]
                    ay = v0[k, 1]
                    az = v0[k, 2]
                    e1x = e1[k, 0]
                    e1y = e1[k, 1]
                    e1z = e1[k, 2]
                    e2x = e2[k, 0]
                    e2y = e2[k, 1]
                    e2z = e2[k, 2]
                    px = dy * e2z - dz * e2y
                    py = dz * e2x - dx * e2z
                    pz = dx * e2y - dy * e2x
                    det = e1x * px + e1y * py + e1z * pz
                    if abs(det) < DET_EPS:
                        continue
                    inv = 1.0 / det
                    tx = ox - ax
                    ty = oy - ay
                    tz = oz - az
                    u = (tx * px + ty * py + tz * pz) * inv
                    if u < -BARY_TOL or u > 1.0 + BARY_TOL:
                        continue
                    qx = ty * e1z - tz * e1y
                    qy = tz * e1x - tx * e1z
                    qz = tx * e1y - ty * e1x
                    v = (dx * qx + dy * qy + dz * qz) * inv
                    if v < -BARY_TOL or u + v > 1.0 + BARY_TOL:
                        continue
                    t = (e2x * qx + e2y * qy + e2z * qz) * inv
                    if t > RAY_EPS and t < best_t:
                        best_t = t
                        best_tri = tri_ids[k]
            else:
                stack[top] = left
                top += 1
                stack[top] = node_right[node]
                top += 1
        out_t[i] = best_t
        out_tri[i] = best_tri
    return out_t, out_tri


class TriangleBVH:
    """Closest-hit raycaster over a validated mesh."""

    def __init__(self, mesh: TriMesh, leaf_size=_LEAF_SIZE):
        self.mesh = mesh
        tri = mesh.vertices[mesh.faces]
        lo = tri.min(axis=1)
        hi = tri.max(axis=1)
        centroids = tri.mean(axis=1)

        node_min = []
        node_max = []
        node_left = []
        node_right = []
        order = np.arange(len(tri), dtype=np.int64)

        # iterative median-split build
        stack = [(0, len(tri), -1, False)]  # start, stop, parent, is_right
        while stack:
            start, stop, parent, is_right = stack.pop()
            ids = order[start:stop]
            bmin = lo[ids].min(axis=0) - _BOX_PAD
            bmax = hi[ids].max(axis=0) + _BOX_PAD
            node = len(node_min)
            node_min.append(bmin)
            node_max.append(bmax)
            node_left.append(0)
            node_right.append(0)
            if parent >= 0:
                if is_right:
                    node_right[parent] = node
                else:
                    node_left[parent] = node
            count = stop - start
            if count <= leaf_size:
                node_left[node] = -(start + 1)
                node_right[node] = count
                continue
            axis = int(np.argmax(bmax - bmin))
            mid = start + count // 2
            sel = np.argpartition(centroids[ids, axis], count // 2)
            order[start:stop] = ids[sel]
            stack.append((start, mid, node, False))
            stack.append((mid, stop, node, True))

        self._node_min = np.ascontiguousarray(node_min, dtype=np.float64)
        self._node_max = np.ascontiguousarray(node_max, dtype=np.float64)
        self._node_left = np.asarray(node_left, dtype=np.int64)
        self._node_right = np.asarray(node_right, dtype=np.int64)
        self._tri_ids = order
        reordered = tri[order]
        self._v0 = np.ascontiguousarray(reordered[:, 0])
        self._e1 = np.ascontiguousarray(reordered[:, 1] - reordered[:, 0])
        self._e2 = np.ascontiguousarray(reordered[:, 2] - reordered[:, 0])

    @property
    def num_nodes(self):
        return len(self._node_min)

    def raycast(self, origins, dirs):
        """Nearest hit along each ray.

        Returns ``(t, tri)`` where ``t`` is the hit distance (inf on miss,
        minimum accepted distance RAY_EPS) and ``tri`` the face index (-1 on
        miss). Direction vectors need not be normalized; ``t`` is then in
        units of the direction length.
        """
        origins = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
        dirs = np.ascontiguousarray(np.atleast_2d(dirs), dtype=np.float64)
        if origins.shape != dirs.shape or origins.shape[-1] != 3:
            raise ValueError("origins and dirs must both be (N, 3)")
        return _traverse_kernel(
            self._node_min,
            self._node_max,
            self._node_left,
            self._node_right,
            self._v0,
            self._e1,
            self._e2,
            self._tri_ids,
            origins,
            dirs,
        )

    def heights_at(self, xy, z_start=None):
        """Terrain height under (x, y) columns via straight-down rays.

        Returns NaN where nothing is hit. ``z_start`` defaults to just above
        the mesh's top.
        """
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        if z_start is None:
            z_start = float(self.mesh.bounds()[1][2]) + 1.0
        origins = np.column_stack([xy[:, 0], xy[:, 1], np.full(len(xy), z_start)])
        dirs = np.broadcast_to(np.array([0.0, 0.0, -1.0]), origins.shape)
        t, _ = self.raycast(origins, dirs)
        heights = z_start - t
        heights[~np.isfinite(t)] = np.nan
        return heights
