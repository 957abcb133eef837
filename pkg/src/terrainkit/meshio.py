"""Mesh readers and writers.

Supported formats:

* ``obj`` -- ASCII Wavefront, ``v``/``f`` records only. Polygon faces are
  fan-triangulated; ``f`` entries may carry ``/`` attribute suffixes, which
  are ignored. Indices may be 1-based positive or negative (relative).
* ``stl`` -- binary STL, little-endian (80-byte header, u32 triangle count,
  then per triangle: normal 3xf32, 9xf32 vertices, u16 attributes).
* ``binary`` -- native ``TPM1`` format: magic bytes ``TPM1``, u32 vertex
  count, u32 face count, f32 vertex triples, u32 face triples, all
  little-endian.

Loading always welds duplicate vertices (1e-9 m) and validates the result,
so shared edges are topologically connected regardless of the source format.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mesh import MeshError, TriMesh, WELD_TOL

TPM_MAGIC = b"TPM1"

_EXT_FORMATS = {".obj": "obj", ".stl": "stl", ".tpm": "binary", ".tpm1": "binary"}


def _format_for(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("obj", "stl", "binary"):
            raise MeshError(f"unsupported mesh format {fmt!r}")
        return fmt
    ext = Path(path).suffix.lower()
    if ext not in _EXT_FORMATS:
        raise MeshError(f"cannot infer mesh format from extension {ext!r}")
    return _EXT_FORMATS[ext]


def load_mesh(path, fmt=None, weld_tol=WELD_TOL) -> TriMesh:
    """Load and validate a mesh; format inferred from the extension unless given."""
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    fmt = _format_for(path, fmt)
    if fmt == "obj":
        vertices, faces = _read_obj(path)
    elif fmt == "stl":
        vertices, faces = _read_stl(path)
    else:
        vertices, faces = _read_tpm(path)
    return TriMesh.from_arrays(vertices, faces, weld_tol=weld_tol)


def save_mesh(mesh: TriMesh, path, fmt=None) -> None:
    path = Path(path)
    fmt = _format_for(path, fmt)
    if fmt == "obj":
        _write_obj(mesh, path)
    elif fmt == "stl":
        _write_stl(mesh, path)
    else:
        _write_tpm(mesh, path)


def _read_obj(path):
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: malformed vertex record")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: face with fewer than 3 vertices")
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshError(f"{path}:{lineno}: bad face index {token!r}") from exc
                    if i > 0:
                        idx.append(i - 1)
                    elif i < 0:
                        idx.append(len(vertices) + i)
                    else:
                        raise MeshError(f"{path}:{lineno}: OBJ indices are 1-based, got 0")
                for k in range(1, len(idx) - 1):  # fan triangulation
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # all other records (vn, vt, usemtl, ...) are ignored
    if not vertices or not faces:
        raise MeshError(f"{path}: empty mesh")
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise MeshError(f"{path}: face vertex index out of range")
    return vertices, faces


def _write_obj(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            # repr round-trips float64 exactly
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def _read_stl(path):
    raw = Path(path).read_bytes()
    if len(raw) < 84:
        raise MeshError(f"{path}: truncated STL header")
    (count,) = struct.unpack_from("<I", raw, 80)
    expected = 84 + count * 50
    if len(raw) < expected:
        raise MeshError(f"{path}: truncated STL body ({len(raw)} < {expected} bytes)")
    if count == 0:
        raise MeshError(f"{path}: empty mesh")
    body = np.frombuffer(raw, dtype=np.uint8, count=count * 50, offset=84)
    tris = body.reshape(count, 50)[:, 12:48].copy().view("<f4").reshape(count, 3, 3)
    vertices = tris.reshape(-1, 3).astype(np.float64)
    faces = np.arange(count * 3, dtype=np.int64).reshape(count, 3)
    return vertices, faces


def _write_stl(mesh, path):
    count = mesh.num_faces
    rec = np.zeros((count, 12), dtype="<f4")
    rec[:, 0:3] = mesh.face_normals.astype(np.float32)
    rec[:, 3:12] = mesh.vertices[mesh.faces].reshape(count, 9).astype(np.float32)
    body = np.zeros((count, 50), dtype=np.uint8)
    body[:, :48] = rec.view(np.uint8).reshape(count, 48)
    with open(path, "wb") as fh:
        fh.write(b"\0" * 80)
        fh.write(struct.pack("<I", count))
        fh.write(body.tobytes())


def _read_tpm(path):
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != TPM_MAGIC:
        raise MeshError(f"{path}: not a TPM1 mesh file")
    nv, nf = struct.unpack_from("<II", raw, 4)
    need = 12 + nv * 12 + nf * 12
    if len(raw) < need:
        raise MeshError(f"{path}: truncated TPM1 body")
    vertices = np.frombuffer(raw, dtype="<f4", count=nv * 3, offset=12)
    faces = np.frombuffer(raw, dtype="<u4", count=nf * 3, offset=12 + nv * 12)
    return (
        vertices.reshape(nv, 3).astype(np.float64),
        faces.reshape(nf, 3).astype(np.int64),
    )


def _write_tpm(mesh, path):
    with open(path, "wb") as fh:
        fh.write(TPM_MAGIC)
        fh.write(struct.pack("<II", mesh.num_vertices, mesh.num_faces))
        fh.write(mesh.vertices.astype("<f4").tobytes())
        fh.write(mesh.faces.astype("<u4").tobytes())
