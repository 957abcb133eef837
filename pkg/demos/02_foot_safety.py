"""Foot-safety signals while a foot slides across a stair lip.

Sweeps a foot from the middle of a tread across the next lip and records
the volumetric penetration penalty plus the landing-area fraction at each
station. The penalty spikes exactly where probes overlap the lip capsule,
and the landing area collapses as the foot overhangs the riser.
"""

import csv
import pathlib

import numpy as np

import terrainkit as tk

OUT = pathlib.Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

mesh = tk.generate_terrain(tk.TerrainSpec("stairs", {"num_steps": 5, "rise": 0.15, "run": 0.30}))
adjacency = tk.compute_adjacency(mesh)
edge_set = tk.extract_edges(mesh, adjacency, tk.EdgeDetectConfig())
grid = tk.build_collision_grid(edge_set.final, 0.04, 64)
bvh = tk.TriangleBVH(mesh)
foot = tk.VolumePointSet.grid(box=(0.2, 0.1, 0.05), shape=(5, 3, 2))

# second tread spans x in [1.3, 1.6] at z = 0.30; the next lip is at x = 1.6
tread_z = 0.30
stations = np.linspace(1.45, 1.75, 31)
walk_speed = 0.6  # m/s forward scrape

rows = []
for x in stations:
    pose = np.array([x, 0.0, tread_z + foot.box[2] / 2, 1.0, 0.0, 0.0, 0.0])
    twist = np.array([walk_speed, 0.0, 0.0, 0.0, 0.0, 0.0])
    _, _, rvol = tk.foot_penalty(grid, pose, twist, foot)
    area = tk.landing_area(bvh, pose, foot)
    rows.append((float(x), float(rvol[0]), area))

with open(OUT / "foot_sweep.csv", "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["x", "r_vol", "landing_area"])
    writer.writerows(rows)

print(f"{'x [m]':>8}{'r_vol':>12}{'landing':>10}")
for x, rvol, area in rows[::5]:
    bar = "#" * int(-rvol * 400)
    print(f"{x:>8.2f}{rvol:>12.5f}{area:>10.2f}  {bar}")

worst = min(rows, key=lambda r: r[1])
print(f"\nworst penalty {worst[1]:.5f} at x = {worst[0]:.2f} (lip at 1.60)")
print(f"sweep written to {OUT / 'foot_sweep.csv'}")
