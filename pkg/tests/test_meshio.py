import numpy as np
import pytest

import terrainkit as tk
from terrainkit.mesh import MeshError


def test_obj_round_trip_cube(cube, tmp_path):
    path = tmp_path / "cube.obj"
    tk.save_mesh(cube, path)
    back = tk.load_mesh(path)
    assert back.num_vertices == 8
    assert back.num_faces == 12
    np.testing.assert_array_equal(back.vertices, cube.vertices)
    np.testing.assert_array_equal(back.faces, cube.faces)


def test_obj_bad_index(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    with pytest.raises(MeshError, match="index out of range"):
        tk.load_mesh(path)


def test_obj_parse_failure(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 zero\n")
    with pytest.raises(MeshError):
        tk.load_mesh(path)


def test_obj_empty(tmp_path):
    path = tmp_path / "empty.obj"
    path.write_text("# nothing here\n")
    with pytest.raises(MeshError, match="empty"):
        tk.load_mesh(path)


def test_obj_quad_fan_triangulation(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh = tk.load_mesh(path)
    assert mesh.num_faces == 2


def test_obj_slash_and_negative_indices(tmp_path):
    path = tmp_path / "attrs.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 -1/3/3\n")
    mesh = tk.load_mesh(path)
    assert mesh.num_faces == 1


def test_stairs_obj_round_trip(stairs, tmp_path):
    path = tmp_path / "stairs.obj"
    tk.save_mesh(stairs, path)
    back = tk.load_mesh(path)
    assert back.num_vertices == stairs.num_vertices
    assert back.num_faces == stairs.num_faces
    # write -> read -> write is byte-stable (weld idempotence)
    path2 = tmp_path / "stairs2.obj"
    tk.save_mesh(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_weld_idempotent_adjacency(stairs, tmp_path):
    path = tmp_path / "stairs.obj"
    tk.save_mesh(stairs, path)
    back = tk.load_mesh(path)
    a1 = tk.compute_adjacency(stairs)
    a2 = tk.compute_adjacency(back)
    np.testing.assert_array_equal(a1.shared_edges, a2.shared_edges)
    np.testing.assert_allclose(a1.dihedral, a2.dihedral, atol=1e-12)


def test_stl_round_trip(cube, tmp_path):
    path = tmp_path / "cube.stl"
    tk.save_mesh(cube, path)
    back = tk.load_mesh(path)
    # STL duplicates vertices per triangle; welding restores shared topology
    assert back.num_vertices == 8
    assert back.num_faces == 12
    assert len(tk.compute_adjacency(back)) == 18


def test_stl_truncated(tmp_path):
    path = tmp_path / "broken.stl"
    path.write_bytes(b"\0" * 50)
    with pytest.raises(MeshError, match="truncated"):
        tk.load_mesh(path)


def test_tpm_round_trip(stairs, tmp_path):
    path = tmp_path / "stairs.tpm"
    tk.save_mesh(stairs, path)
    back = tk.load_mesh(path)
    assert back.num_vertices == stairs.num_vertices
    assert back.num_faces == stairs.num_faces
    np.testing.assert_array_equal(
        back.vertices.astype(np.float32), stairs.vertices.astype(np.float32)
    )


def test_tpm_bad_magic(tmp_path):
    path = tmp_path / "bad.tpm"
    path.write_bytes(b"NOPE" + b"\0" * 20)
    with pytest.raises(MeshError, match="TPM1"):
        tk.load_mesh(path)


def test_missing_file(tmp_path):
    with pytest.raises(MeshError, match="not found"):
        tk.load_mesh(tmp_path / "nope.obj")


def test_format_override(cube, tmp_path):
    path = tmp_path / "cube.bin"
    tk.save_mesh(cube, path, fmt="binary")
    back = tk.load_mesh(path, fmt="binary")
    assert back.num_faces == 12
    with pytest.raises(MeshError, match="format"):
        tk.load_mesh(path, fmt="voxels")
