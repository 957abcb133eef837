import numpy as np
import pytest

import terrainkit as tk
from terrainkit.mesh import MeshError


def test_flat_two_triangles():
    mesh = tk.generate_terrain(tk.TerrainSpec("flat", {"size_x": 2.0, "size_y": 2.0}))
    assert mesh.num_faces == 2
    np.testing.assert_allclose(mesh.face_normals, [[0, 0, 1], [0, 0, 1]], atol=1e-12)


def test_stairs_height():
    mesh = tk.generate_terrain(
        tk.TerrainSpec("stairs", {"num_steps": 5, "rise": 0.15, "run": 0.30})
    )
    assert abs(mesh.vertices[:, 2].max() - 0.75) < 1e-12


def test_rough_deterministic():
    a = tk.generate_terrain(tk.TerrainSpec("rough", {"seed": 7}))
    b = tk.generate_terrain(tk.TerrainSpec("rough", {"seed": 7}))
    assert a.vertices.tobytes() == b.vertices.tobytes()
    assert a.faces.tobytes() == b.faces.tobytes()
    c = tk.generate_terrain(tk.TerrainSpec("rough", {"seed": 8}))
    assert a.vertices.tobytes() != c.vertices.tobytes()


def test_gap_depth():
    mesh = tk.generate_terrain(tk.TerrainSpec("gap", {"gap_width": 0.5, "depth": 0.5}))
    assert abs(mesh.vertices[:, 2].min() + 0.5) < 1e-12
    assert abs(mesh.vertices[:, 2].max()) < 1e-12


def test_box_height():
    mesh = tk.generate_terrain(tk.TerrainSpec("box", {"height": 0.3}))
    assert abs(mesh.vertices[:, 2].max() - 0.3) < 1e-12


def test_slope_fold_angle():
    angle = np.deg2rad(20.0)
    mesh = tk.generate_terrain(tk.TerrainSpec("slope", {"angle": angle}))
    adjacency = tk.compute_adjacency(mesh)
    folds = adjacency.dihedral[adjacency.dihedral > 1e-6]
    np.testing.assert_allclose(folds, angle, atol=1e-9)


def test_all_kinds_validate(terrains):
    for name, mesh in terrains.items():
        assert mesh.num_faces > 0, name
        assert np.allclose(np.linalg.norm(mesh.face_normals, axis=1), 1.0, atol=1e-6), name


def test_unsupported_kind():
    with pytest.raises(MeshError, match="unsupported"):
        tk.TerrainSpec("dunes")


def test_nonpositive_parameter():
    with pytest.raises(MeshError, match="positive"):
        tk.TerrainSpec("stairs", {"rise": -0.1})


def test_shared_vertices_at_folds(stairs):
    # fold lines are topologically connected without welding
    adjacency = tk.compute_adjacency(stairs)
    sharp = (adjacency.dihedral > np.pi / 4).sum()
    assert sharp == 10  # 2 fold lines per step, 5 steps
