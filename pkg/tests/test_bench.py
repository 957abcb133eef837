import json

import numpy as np
import pytest

import terrainkit as tk
from terrainkit.bench import BenchReport, format_table, run_bench


class TestOraclePenetration:
    def test_empty_edges_all_zero(self):
        out = tk.oracle_penetration(np.empty((0, 2, 3)), 0.05, np.random.default_rng(0).normal(size=(10, 3)))
        assert np.all(out == 0.0)

    def test_single_capsule_closed_form(self):
        segs = np.array([[[0, 0, 0], [1, 0, 0]]], dtype=np.float64)
        p = np.array([[0.25, 0.03, 0.04]])  # perpendicular distance 0.05 exactly
        out = tk.oracle_penetration(segs, 0.08, p)
        # direction (0, 0.6, 0.8), depth 0.03
        np.testing.assert_allclose(out[0], [0.0, 0.6 * 0.03, 0.8 * 0.03], atol=1e-15)

    def test_matches_grid(self, stairs_edges, stairs_grid, stairs):
        rng = np.random.default_rng(2)
        lo, hi = stairs.bounds()
        points = rng.uniform(lo - 0.05, hi + 0.05, size=(5000, 3))
        ref = tk.oracle_penetration(stairs_edges.final, stairs_grid.radius, points)
        fast = stairs_grid.query_offsets(points)
        assert np.abs(ref - fast).max() < 1e-9


class TestOracleRaycast:
    def test_parallel_ray_misses_coplanar_triangle(self):
        mesh = tk.TriMesh.from_arrays(
            np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]])
        )
        t, tri = tk.oracle_raycast(mesh, np.array([[0.0, -1.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
        assert np.isinf(t[0]) and tri[0] == -1

    def test_shared_edge_single_hit(self):
        # downward ray exactly through the shared diagonal of two triangles
        mesh = tk.generate_terrain(tk.TerrainSpec("flat", {"size_x": 2.0, "size_y": 2.0}))
        t, tri = tk.oracle_raycast(mesh, np.array([[0.0, 0.0, 1.0]]), np.array([[0.0, 0.0, -1.0]]))
        assert abs(t[0] - 1.0) < 1e-12
        assert tri[0] >= 0

    def test_matches_bvh(self, stairs, stairs_bvh):
        rng = np.random.default_rng(4)
        lo, hi = stairs.bounds()
        origins = rng.uniform(lo, hi, size=(2000, 3))
        origins[:, 2] = hi[2] + 0.5
        dirs = rng.normal(size=(2000, 3))
        dirs[:, 2] = -np.abs(dirs[:, 2]) - 0.2
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t_ref, _ = tk.oracle_raycast(stairs, origins, dirs)
        t_fast, _ = stairs_bvh.raycast(origins, dirs)
        hit = np.isfinite(t_ref)
        assert np.array_equal(hit, np.isfinite(t_fast))
        assert np.abs(t_ref[hit] - t_fast[hit]).max() < 1e-9


class TestRunBench:
    def test_empty_sizes(self):
        assert run_bench("penetration", []) == []

    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="unknown bench suite"):
            run_bench("warp-drive", [10])

    def test_penetration_report(self):
        reports = run_bench("penetration", [2000], repeats=2)
        assert len(reports) == 1
        r = reports[0]
        assert r.operation == "grid_penetration"
        assert r.batch_size == 2000
        assert r.throughput > 0
        assert r.max_deviation < 1e-9
        parsed = json.loads(r.to_json_line())
        assert parsed["throughput_unit"] == "queries/s"

    def test_table_format(self):
        report = BenchReport("op", 10, 0.001, 10000.0, "queries/s", 0.0, 5, 1)
        table = format_table([report])
        assert "op" in table and "queries/s" in table
