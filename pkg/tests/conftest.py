import numpy as np
import pytest

import terrainkit as tk


def make_unit_cube():
    """Watertight unit cube: 8 vertices, 12 triangles, outward normals."""
    vertices = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (-z)
            [4, 5, 6], [4, 6, 7],  # top (+z)
            [0, 1, 5], [0, 5, 4],  # -y
            [1, 2, 6], [1, 6, 5],  # +x
            [2, 3, 7], [2, 7, 6],  # +y
            [3, 0, 4], [3, 4, 7],  # -x
        ],
        dtype=np.int64,
    )
    return tk.TriMesh.from_arrays(vertices, faces)


TERRAIN_SPECS = {
    "stairs": tk.TerrainSpec("stairs"),
    "gap": tk.TerrainSpec("gap"),
    "box": tk.TerrainSpec("box"),
    "rough": tk.TerrainSpec("rough", {"cells": 14, "amplitude": 0.08, "seed": 4}),
    "slope": tk.TerrainSpec("slope"),
}


@pytest.fixture(scope="session")
def cube():
    return make_unit_cube()


@pytest.fixture(scope="session")
def terrains():
    return {name: tk.generate_terrain(spec) for name, spec in TERRAIN_SPECS.items()}


@pytest.fixture(scope="session")
def stairs(terrains):
    return terrains["stairs"]


@pytest.fixture(scope="session")
def stairs_bvh(stairs):
    return tk.TriangleBVH(stairs)


@pytest.fixture(scope="session")
def stairs_edges(stairs):
    adjacency = tk.compute_adjacency(stairs)
    return tk.extract_edges(stairs, adjacency, tk.EdgeDetectConfig())


@pytest.fixture(scope="session")
def stairs_grid(stairs_edges):
    return tk.build_collision_grid(stairs_edges.final, 0.04, 64)
