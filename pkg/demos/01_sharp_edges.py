"""Detect sharp terrain edges and build capsule collision grids.

Walks every procedural terrain kind, extracts the raw sharp-edge set,
merges fragments into long chords, and exports overlay files a viewer can
draw on top of the mesh.
"""

import pathlib

import numpy as np

import terrainkit as tk

OUT = pathlib.Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

specs = {
    "stairs": tk.TerrainSpec("stairs", {"num_steps": 5, "rise": 0.15, "run": 0.30}),
    "gap": tk.TerrainSpec("gap", {"gap_width": 0.5, "depth": 0.5}),
    "box": tk.TerrainSpec("box", {"height": 0.3}),
    "rough": tk.TerrainSpec("rough", {"cells": 24, "amplitude": 0.06, "seed": 3}),
    "slope": tk.TerrainSpec("slope", {"angle": np.deg2rad(25)}),
}

cfg = tk.EdgeDetectConfig()  # 30 deg threshold, 4 cm capsules, 64^3 grid
print(f"sharpness threshold: {np.rad2deg(cfg.sharpness_thresh):.0f} deg, capsule radius {cfg.cylinder_radius} m")
print(f"{'terrain':<10}{'faces':>8}{'raw':>6}{'final':>7}{'reduction':>11}")

for name, spec in specs.items():
    mesh = tk.generate_terrain(spec)
    adjacency = tk.compute_adjacency(mesh)
    edge_set = tk.extract_edges(mesh, adjacency, cfg)
    n_raw, n_final = len(edge_set.raw), len(edge_set.final)
    ratio = f"{n_raw / n_final:.2f}x" if n_final else "-"
    print(f"{name:<10}{mesh.num_faces:>8}{n_raw:>6}{n_final:>7}{ratio:>11}")

    tk.save_mesh(mesh, OUT / f"{name}.obj")
    tk.write_segments(edge_set.final, OUT / f"{name}_edges.json")

    if n_final:
        # spot-check one penetration query against the grid
        grid = tk.build_collision_grid(edge_set.final, cfg.cylinder_radius, cfg.grid_resolution)
        probe = edge_set.final[0].mean(axis=0) + [0.0, 0.0, cfg.cylinder_radius / 2]
        depth = grid.penetration_depths(probe[None, :])[0]
        print(f"{'':<10}probe {np.round(probe, 3)} penetrates {depth:.3f} m")

print(f"\nmeshes and edge overlays written to {OUT}")
