"""Flat-patch targets and position-based velocity commands.

Samples level landing spots on a staircase, then assigns each simulated
agent a target patch ahead of it and derives clipped forward/yaw commands.
A fraction of agents get pure in-place turning commands instead.
"""

import pathlib

import numpy as np

import terrainkit as tk
from terrainkit.commands import patches_array, write_command_trace, write_patches_json
from terrainkit.rotations import quat_from_yaw

OUT = pathlib.Path(__file__).resolve().parent / "out"
OUT.mkdir(exist_ok=True)

mesh = tk.generate_terrain(tk.TerrainSpec("stairs", {"num_steps": 5, "rise": 0.15, "run": 0.30}))
bvh = tk.TriangleBVH(mesh)

patch_cfg = tk.PatchConfig(radius=0.1, max_height_diff=0.05, n_targets=20, seed=11)
lo, hi = mesh.bounds()
patches = tk.sample_flat_patches(
    bvh, patch_cfg, ((lo[0] + 0.1, hi[0] - 0.1), (lo[1] + 0.1, hi[1] - 0.1))
)
centers = patches_array(patches)
write_patches_json(patches, OUT / "patches.json")
levels = sorted(set(np.round(centers[:, 2], 3)))
print(f"{len(patches)} patches on tread levels {levels}")

# a platoon of agents on the lead-in platform, fanned out in heading
rng = np.random.default_rng(0)
n_agents = 12
poses = np.zeros((n_agents, 7))
poses[:, 0] = 0.4
poses[:, 1] = np.linspace(-0.8, 0.8, n_agents)
yaws = rng.uniform(-0.6, 0.6, n_agents)
poses[:, 3:7] = np.stack([quat_from_yaw(a) for a in yaws])

cmd_cfg = tk.CommandConfig(k_v=1.0, k_omega=1.5, v_max=1.2, omega_max=1.0, turning_fraction=0.25)
commands, target_idx = tk.assign_commands(poses, centers, cmd_cfg, rng)

print(f"\n{'agent':>6}{'yaw':>7}{'v_x':>7}{'omega_z':>9}  target")
for k in range(n_agents):
    label = "turning" if target_idx[k] < 0 else np.round(centers[target_idx[k]], 2)
    print(f"{k:>6}{yaws[k]:>7.2f}{commands[k, 0]:>7.2f}{commands[k, 2]:>9.2f}  {label}")

write_command_trace(
    OUT / "commands.csv",
    [(k, commands[k, 0], commands[k, 2], target_idx[k]) for k in range(n_agents)],
)
turners = int((target_idx < 0).sum())
print(f"\n{turners}/{n_agents} agents turning in place; trace -> {OUT / 'commands.csv'}")

# the scalar helpers used by the training loop
print("style reward at D = 1, 0, -1:", [tk.style_reward(d) for d in (1.0, 0.0, -1.0)])
print("pd torque for 0.1 rad error at kp=100, kd=2, qdot=0.5:", tk.pd_torque(0.1, 0.0, 0.5, 100.0, 2.0))
