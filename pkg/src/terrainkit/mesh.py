"""Indexed triangle meshes with derived face adjacency and dihedral angles.

The world frame is z-up, x-forward. Meshes are assumed consistently wound
(counter-clockwise seen from the outside / above); orientation repair is out
of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Duplicated vertices closer than this are merged so shared edges become
# topologically connected (OBJ/STL exporters routinely duplicate vertices).
WELD_TOL = 1e-9

# Faces with area at or below this are dropped during validation.
DEGENERATE_AREA = 1e-12


class MeshError(ValueError):
    """Raised for unloadable or structurally invalid meshes."""


def weld_vertices(vertices, faces, tol=WELD_TOL):
    """Merge vertices that coincide within ``tol`` and remap faces.

    Quantizes coordinates onto a ``tol`` grid; exact duplicates (the common
    exporter case) always merge, points straddling a grid boundary may not.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if len(vertices) == 0:
        return vertices, faces
    keys = np.round(vertices / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()  # numpy 2.x may return (V, 1) with axis=0
    # keep the first occurrence of each welded vertex, in original order
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    new_vertices = vertices[first[order]]
    new_faces = rank[inverse][faces]
    return new_vertices, new_faces


def face_normals(vertices, faces):
    """Unit normals (F, 3) via the right-hand rule on vertex order."""
    tri = vertices[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    lengths = np.linalg.norm(n, axis=1)
    safe = np.where(lengths > 0.0, lengths, 1.0)
    return n / safe[:, None]


def face_areas(vertices, faces):
    tri = vertices[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(n, axis=1)


@dataclass(frozen=True)
class TriMesh:
    """Validated indexed triangle mesh.

    Immutable after construction; safe to share across threads. Build through
    :meth:`from_arrays` (or the mesh loaders), which welds duplicate vertices,
    drops degenerate faces, and derives unit face normals.
    """

    vertices: np.ndarray  # (V, 3) float64, meters
    faces: np.ndarray  # (F, 3) int64
    face_normals: np.ndarray  # (F, 3) float64, unit

    @classmethod
    def from_arrays(cls, vertices, faces, weld_tol=WELD_TOL):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must be (F, 3), got {faces.shape}")
        if len(vertices) == 0 or len(faces) == 0:
            raise MeshError("empty mesh")
        if not np.all(np.isfinite(vertices)):
            raise MeshError("non-finite vertex coordinates")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshError("face vertex index out of range")
        if weld_tol is not None and weld_tol > 0:
            vertices, faces = weld_vertices(vertices, faces, weld_tol)
        keep = face_areas(vertices, faces) > DEGENERATE_AREA
        faces = faces[keep]
        if len(faces) == 0:
            raise MeshError("all faces degenerate")
        normals = face_normals(vertices, faces)
        for arr in (vertices, faces, normals):
            arr.setflags(write=False)
        return cls(vertices=vertices, faces=faces, face_normals=normals)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.faces)

    def bounds(self):
        """Axis-aligned bounding box as (min_xyz, max_xyz)."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class FaceAdjacency:
    """All manifold interior edges of a mesh with their dihedral angles.

    One row per edge shared by exactly two faces. ``dihedral`` is the angle
    between the two face normals in [0, pi]: 0 for coplanar neighbors, pi/2
    for a right-angle step. Boundary edges (one face) and non-manifold edges
    (more than two faces) are excluded and reported separately.
    """

    face_pairs: np.ndarray  # (K, 2) int64
    shared_edges: np.ndarray  # (K, 2) int64 vertex indices, row-sorted
    dihedral: np.ndarray  # (K,) float64 radians in [0, pi]
    boundary_edges: np.ndarray  # (B, 2) int64
    nonmanifold_edges: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))

    def __len__(self):
        return len(self.dihedral)


def merge_meshes(meshes) -> TriMesh:
    """Concatenate meshes into one scene (terrain plus robot parts, say).

    Vertices are re-welded so coincident geometry across parts connects.
    """
    meshes = list(meshes)
    if not meshes:
        raise MeshError("empty mesh")
    vertices = np.concatenate([m.vertices for m in meshes])
    offsets = np.cumsum([0] + [m.num_vertices for m in meshes[:-1]])
    faces = np.concatenate([m.faces + off for m, off in zip(meshes, offsets)])
    return TriMesh.from_arrays(vertices, faces)


def compute_adjacency(mesh: TriMesh) -> FaceAdjacency:
    """Group the mesh's directed edges into interior / boundary / non-manifold.

    Complexity O(F log F); the O(F^2) reference used in tests is
    :func:`terrainkit.bench.brute_force_adjacency`.
    """
    faces = mesh.faces
    nv = mesh.num_vertices
    # 3 undirected edges per face, each keyed by sorted vertex pair
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    owners = np.tile(np.arange(len(faces), dtype=np.int64), 3)
    keys = edges[:, 0] * np.int64(nv) + edges[:, 1]
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    edges = edges[order]
    owners = owners[order]
    unique_keys, start, counts = np.unique(keys, return_index=True, return_counts=True)

    interior = counts == 2
    boundary = counts == 1
    nonmanifold = counts > 2

    i0 = start[interior]
    face_pairs = np.stack([owners[i0], owners[i0 + 1]], axis=1)
    shared = edges[i0]
    n0 = mesh.face_normals[face_pairs[:, 0]]
    n1 = mesh.face_normals[face_pairs[:, 1]]
    cosang = np.clip(np.einsum("ij,ij->i", n0, n1), -1.0, 1.0)
    dihedral = np.arccos(cosang)

    adj = FaceAdjacency(
        face_pairs=face_pairs,
        shared_edges=shared,
        dihedral=dihedral,
        boundary_edges=edges[start[boundary]],
        nonmanifold_edges=edges[start[nonmanifold]],
    )
    for arr in (adj.face_pairs, adj.shared_edges, adj.dihedral, adj.boundary_edges, adj.nonmanifold_edges):
        arr.setflags(write=False)
    return adj
