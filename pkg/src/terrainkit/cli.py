"""Command-line interface for batch use and inspection.

Exit codes: 0 success, 2 input/parse error, 3 empty mesh where emptiness is
fatal, 4 sampling budget exhausted. All subcommands taking --seed are
bit-deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_BUDGET = 4

_FORMATS_EPILOG = """\
file formats:
  mesh            .obj (ASCII v/f), .stl (binary little-endian), .tpm (TPM1:
                  magic "TPM1", u32 vertex count, u32 face count, f32 vertex
                  triples, u32 face index triples, little-endian)
  edges           .json (array of {"a": [x,y,z], "b": [x,y,z]} in meters) or
                  TPE1 binary (magic "TPE1", u32 count, f32 sextuples)
  depth image     <stem>.json metadata {"width", "height", "unit": "m"|"normalized"}
                  plus <stem>.f32 raw little-endian float32, row-major;
                  invalid pixels are negative in metric images
  patches         .json array of [x, y, z] centers in meters
  trajectory CSV  columns: t, px, py, pz, qw, qx, qy, qz, vx, vy, vz, wx, wy, wz
                  (foot pose in meters + scalar-first unit quaternion, twist in
                  m/s and rad/s; header row optional)
  poses CSV       columns: px, py, pz, qw, qx, qy, qz (header row optional)
  command CSV     columns: t, v_x, omega_z, target_id (m/s, rad/s, -1 = turning)
  depth stream    TPD1 frames on stdin/stdout: 16-byte header (magic "TPD1",
                  u32 width, u32 height, u32 flags; flag bit 0 = normalized)
                  + row-major f32 payload
  config file     JSON or TOML; sections "edges", "patches", "commands",
                  "sim", "real", "history" supply defaults (explicit flags win)

exit codes: 0 ok, 2 input error, 3 empty mesh, 4 attempt budget exhausted
"""


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="terrainkit",
        description=__doc__,
        epilog=_FORMATS_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed (bit-deterministic runs)")
    parser.add_argument("--config", default=None, help="JSON/TOML config file merged under explicit flags")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: available parallelism)")
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # subparser from clobbering values parsed at the top level
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (bit-deterministic runs)")
    shared.add_argument("--config", default=argparse.SUPPRESS, help="JSON/TOML config file merged under explicit flags")
    shared.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default: available parallelism)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("edges", parents=[shared], help="detect and merge sharp terrain edges", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mesh", required=True, help="input mesh path (.obj/.stl/.tpm)")
    p.add_argument("--tau", type=float, default=None, help="sharpness threshold in radians (default 0.5236 = 30 deg)")
    p.add_argument("--tau-deg", type=float, default=None, help="sharpness threshold in degrees (overrides --tau)")
    p.add_argument("--radius", type=float, default=None, help="capsule radius in meters (default 0.04)")
    p.add_argument("--grid", type=int, default=None, help="collision grid resolution, cells per axis (default 64)")
    p.add_argument("--out", required=True, help="output edge file (.json or TPE1 binary)")
    p.add_argument("--raw", action="store_true", help="write raw detected segments instead of merged ones")

    p = sub.add_parser("depth", parents=[shared], help="render a depth image and run a pipeline", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mesh", required=True, help="scene mesh path")
    p.add_argument("--camera", required=True, help="camera JSON: width, height, hfov (radians) or hfov_deg, position [m], and quaternion [w,x,y,z] / forward [x,y,z] / rotation 3x3")
    p.add_argument("--pipeline", choices=("sim", "real", "none"), default="none", help="degradation (sim), refinement (real), or raw metric output (none)")
    p.add_argument("--out", required=True, help="output stem; writes <stem>.json and <stem>.f32")

    p = sub.add_parser("patches", parents=[shared], help="sample flat navigation patches", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mesh", required=True, help="terrain mesh path")
    p.add_argument("--radius", type=float, default=None, help="patch disk radius in meters (default 0.3)")
    p.add_argument("--delta", type=float, default=None, help="max height difference over the disk in meters (default 0.05)")
    p.add_argument("--count", type=int, default=None, help="number of patches to sample (default 16)")
    p.add_argument("--max-attempts", type=int, default=None, help="candidate budget before exit code 4")
    p.add_argument("--bounds", default=None, help="sampling rectangle X0,Y0,X1,Y1 in meters (default: mesh footprint shrunk by the radius)")
    p.add_argument("--out", required=True, help="output patch JSON path")

    p = sub.add_parser("penalty", parents=[shared], help="per-step penetration penalty and landing area for a foot trajectory", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mesh", required=True, help="terrain mesh path (for landing area)")
    p.add_argument("--edges", required=True, help="edge file (.json or TPE1)")
    p.add_argument("--radius", type=float, default=None, help="capsule radius in meters (default 0.04)")
    p.add_argument("--grid", type=int, default=None, help="collision grid resolution (default 64)")
    p.add_argument("--traj", required=True, help="trajectory CSV (see file formats)")
    p.add_argument("--foot-box", default=None, help="foot collision box L,W,H in meters (default 0.2,0.1,0.05)")
    p.add_argument("--foot-points", default=None, help="volume point grid NX,NY,NZ (default 5,3,2)")
    p.add_argument("--support-tol", type=float, default=0.01, help="landing-area support tolerance in meters (default 0.01)")
    p.add_argument("--out", required=True, help="output CSV: t, r_vol, landing_area")

    p = sub.add_parser("bench", parents=[shared], help="run benchmark suites with oracle cross-checks", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--suite", required=True, help="suite name: depth, penetration, or raycast")
    p.add_argument("--sizes", required=True, help="comma list; WxH pairs for depth (e.g. 36x18), counts otherwise")
    p.add_argument("--repeats", type=int, default=5, help="timed runs per size, median reported (default 5)")
    p.add_argument("--json-lines", default=None, help="also write reports as JSON lines to this path")

    p = sub.add_parser("depth-stream", parents=[shared], help="pipe TPD1 depth frames from stdin through a pipeline to stdout", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--pipeline", choices=("sim", "real"), required=True, help="which pipeline to apply to each frame")

    p = sub.add_parser("terrain", parents=[shared], help="generate a procedural terrain mesh", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--kind", required=True, help="flat, stairs, gap, box, rough, or slope")
    p.add_argument("--params", default=None, help='JSON dict of generator parameters, e.g. {"num_steps": 5, "rise": 0.15}')
    p.add_argument("--out", required=True, help="output mesh path (.obj/.stl/.tpm)")

    p = sub.add_parser("commands", parents=[shared], help="assign flat-patch targets and velocity commands to agent poses", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--patches", required=True, help="patch JSON file")
    p.add_argument("--poses", required=True, help="poses CSV (px,py,pz,qw,qx,qy,qz)")
    p.add_argument("--kv", type=float, default=None, help="linear gain 1/s (default 1.0)")
    p.add_argument("--komega", type=float, default=None, help="angular gain 1/s (default 1.0)")
    p.add_argument("--vmax", type=float, default=None, help="forward velocity limit m/s (default 1.5)")
    p.add_argument("--omegamax", type=float, default=None, help="yaw rate limit rad/s (default 1.0)")
    p.add_argument("--turning-fraction", type=float, default=None, help="fraction of agents given pure turning commands (default 0)")
    p.add_argument("--out", required=True, help="output command CSV: t, v_x, omega_z, target_id")

    p = sub.add_parser("serve", parents=[shared], help="serve batched session queries over a stdio frame protocol", epilog=_FORMATS_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)

    return parser


def _load_config(path):
    if path is None:
        return {}
    from .pipeline import load_pipeline_file

    return load_pipeline_file(path)


def _pick(flag_value, config, section, key, default):
    if flag_value is not None:
        return flag_value
    return config.get(section, {}).get(key, default)


def _load_mesh_checked(path):
    from .meshio import load_mesh

    return load_mesh(path)


def _camera_from_json(path):
    from .camera import CameraModel
    from .rotations import quat_to_matrix

    with open(path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    width = int(spec["width"])
    height = int(spec["height"])
    if "hfov_deg" in spec:
        hfov = np.deg2rad(float(spec["hfov_deg"]))
    else:
        hfov = float(spec["hfov"])
    vfov = None
    if "vfov_deg" in spec:
        vfov = np.deg2rad(float(spec["vfov_deg"]))
    elif "vfov" in spec:
        vfov = float(spec["vfov"])
    position = np.asarray(spec.get("position", (0.0, 0.0, 0.0)), dtype=np.float64)
    if "forward" in spec:
        return CameraModel.looking(width, height, hfov, position, spec["forward"], up_hint=spec.get("up", (0.0, 0.0, 1.0)), vfov=vfov)
    if "quaternion" in spec:
        rotation = quat_to_matrix(np.asarray(spec["quaternion"], dtype=np.float64))
    elif "rotation" in spec:
        rotation = np.asarray(spec["rotation"], dtype=np.float64)
    else:
        rotation = np.eye(3)
    return CameraModel.from_fov(width, height, hfov, vfov=vfov, position=position, rotation=rotation)


def _read_csv_rows(path, columns):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                continue  # header row
    arr = np.asarray(rows, dtype=np.float64)
    if arr.size == 0 or arr.shape[1] != columns:
        raise ValueError(f"{path}: expected {columns} numeric columns")
    return arr


def cmd_edges(args, config):
    from . import edges as edges_mod
    from .mesh import compute_adjacency

    mesh = _load_mesh_checked(args.mesh)
    if args.tau_deg is not None:
        tau = np.deg2rad(args.tau_deg)
    else:
        tau = _pick(args.tau, config, "edges", "tau", edges_mod.DEFAULT_SHARPNESS)
    cfg = edges_mod.EdgeDetectConfig(
        sharpness_thresh=float(tau),
        cylinder_radius=float(_pick(args.radius, config, "edges", "radius", edges_mod.DEFAULT_RADIUS)),
        grid_resolution=int(_pick(args.grid, config, "edges", "grid", edges_mod.DEFAULT_GRID_RES)),
    )
    edge_set = edges_mod.extract_edges(mesh, compute_adjacency(mesh), cfg)
    chosen = edge_set.raw if args.raw else edge_set.final
    edges_mod.write_segments(chosen, args.out)
    n_raw, n_final = len(edge_set.raw), len(edge_set.final)
    ratio = (n_raw / n_final) if n_final else 1.0
    print(f"{n_raw} raw edges, {n_final} final edges, reduction ratio {ratio:.2f}")
    return EXIT_OK


def cmd_depth(args, config):
    from .bvh import TriangleBVH
    from .pipeline import fsim_apply, freal_apply, real_config_from_dict, sim_config_from_dict
    from .render import render_depth, save_depth

    mesh = _load_mesh_checked(args.mesh)
    try:
        cam = _camera_from_json(args.camera)
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"bad camera spec: {exc}") from exc
    img = render_depth(TriangleBVH(mesh), cam)
    if args.pipeline == "sim":
        section = dict(config.get("sim", {}))
        if args.seed is not None:
            section["seed"] = args.seed
        cfg = sim_config_from_dict({"out_width": cam.width, "out_height": cam.height, **section})
        img = fsim_apply(img, cfg)
    elif args.pipeline == "real":
        cfg = real_config_from_dict({"out_width": cam.width, "out_height": cam.height, **config.get("real", {})})
        img = freal_apply(img, cfg)
    save_depth(img, args.out)
    print(f"wrote {args.out}.json / {args.out}.f32 ({img.width}x{img.height}, unit {img.unit})")
    return EXIT_OK


def cmd_patches(args, config):
    from .bvh import TriangleBVH
    from .commands import PatchConfig, sample_flat_patches, write_patches_json

    mesh = _load_mesh_checked(args.mesh)
    cfg = PatchConfig(
        radius=float(_pick(args.radius, config, "patches", "radius", 0.3)),
        max_height_diff=float(_pick(args.delta, config, "patches", "delta", 0.05)),
        n_targets=int(_pick(args.count, config, "patches", "count", 16)),
        max_attempts=args.max_attempts,
        seed=args.seed,
    )
    if args.bounds is not None:
        x0, y0, x1, y1 = (float(v) for v in args.bounds.split(","))
        bounds = ((x0, x1), (y0, y1))
    else:
        from .commands import default_patch_bounds

        bounds = default_patch_bounds(mesh, cfg.radius)
    patches = sample_flat_patches(TriangleBVH(mesh), cfg, bounds)
    write_patches_json(patches, args.out)
    print(f"wrote {len(patches)} patches to {args.out}")
    return EXIT_OK


def cmd_penalty(args, config):
    from .bvh import TriangleBVH
    from .capsules import build_collision_grid
    from .edges import read_segments
    from .foot import VolumePointSet, foot_penalty, landing_area

    mesh = _load_mesh_checked(args.mesh)
    segments = read_segments(args.edges)
    if len(segments) == 0:
        print("error: empty edge file", file=sys.stderr)
        return EXIT_EMPTY
    radius = float(_pick(args.radius, config, "edges", "radius", 0.04))
    grid_res = int(_pick(args.grid, config, "edges", "grid", 64))
    grid = build_collision_grid(segments, radius, grid_res)
    box = tuple(float(v) for v in args.foot_box.split(",")) if args.foot_box else (0.2, 0.1, 0.05)
    shape = tuple(int(v) for v in args.foot_points.split(",")) if args.foot_points else (5, 3, 2)
    pts = VolumePointSet.grid(box=box, shape=shape)
    rows = _read_csv_rows(args.traj, 14)
    bvh = TriangleBVH(mesh)
    poses = rows[:, 1:8]
    twists = rows[:, 8:14]
    _, _, rvol = foot_penalty(grid, poses, twists, pts)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "r_vol", "landing_area"])
        for k in range(len(rows)):
            area = landing_area(bvh, poses[k], pts, support_tolerance=args.support_tol)
            writer.writerow([rows[k, 0], repr(float(rvol[k])), repr(float(area))])
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_bench(args, config):
    from .bench import format_table, run_bench

    tokens = [tok for tok in args.sizes.split(",") if tok.strip()]
    if args.suite == "depth":
        sizes = [tuple(int(v) for v in tok.lower().split("x")) for tok in tokens]
    else:
        sizes = [int(tok) for tok in tokens]
    reports = run_bench(args.suite, sizes, repeats=args.repeats, threads=args.threads)
    if reports:
        print(format_table(reports))
    if args.json_lines:
        with open(args.json_lines, "w", encoding="utf-8") as fh:
            for report in reports:
                fh.write(report.to_json_line() + "\n")
    return EXIT_OK


def cmd_depth_stream(args, config):
    from .pipeline import (
        STREAM_FLAG_NORMALIZED,
        freal_apply,
        fsim_apply,
        read_stream_frame,
        real_config_from_dict,
        sim_config_from_dict,
        write_stream_frame,
    )
    from .render import DepthImage

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    rng = np.random.default_rng(args.seed)
    count = 0
    while True:
        frame = read_stream_frame(stdin)
        if frame is None:
            break
        values, _ = frame
        img = DepthImage(values, values > 0.0 if args.pipeline == "real" else np.isfinite(values), "m")
        h, w = values.shape
        if args.pipeline == "sim":
            cfg = sim_config_from_dict({"out_width": w, "out_height": h, **config.get("sim", {})})
            out = fsim_apply(img, cfg, rng)
        else:
            cfg = real_config_from_dict({"out_width": w, "out_height": h, **config.get("real", {})})
            out = freal_apply(img, cfg)
        write_stream_frame(stdout, out.values, STREAM_FLAG_NORMALIZED)
        count += 1
    stdout.flush()
    print(f"processed {count} frames", file=sys.stderr)
    return EXIT_OK


def cmd_terrain(args, config):
    from .meshio import save_mesh
    from .terrain import TerrainSpec, generate_terrain

    params = json.loads(args.params) if args.params else {}
    mesh = generate_terrain(TerrainSpec(args.kind, params))
    save_mesh(mesh, args.out)
    print(f"wrote {args.kind} terrain ({mesh.num_vertices} vertices, {mesh.num_faces} faces) to {args.out}")
    return EXIT_OK


def cmd_commands(args, config):
    from .commands import CommandConfig, assign_commands, read_patches_json, write_command_trace

    patches = read_patches_json(args.patches)
    if len(patches) == 0:
        print("error: empty patch file", file=sys.stderr)
        return EXIT_EMPTY
    poses = _read_csv_rows(args.poses, 7)
    cfg = CommandConfig(
        k_v=float(_pick(args.kv, config, "commands", "k_v", 1.0)),
        k_omega=float(_pick(args.komega, config, "commands", "k_omega", 1.0)),
        v_max=float(_pick(args.vmax, config, "commands", "v_max", 1.5)),
        omega_max=float(_pick(args.omegamax, config, "commands", "omega_max", 1.0)),
        turning_fraction=float(_pick(args.turning_fraction, config, "commands", "turning_fraction", 0.0)),
    )
    rng = np.random.default_rng(args.seed)
    cmds, target_idx = assign_commands(poses, patches, cfg, rng)
    write_command_trace(args.out, [(k, cmds[k, 0], cmds[k, 2], target_idx[k]) for k in range(len(cmds))])
    print(f"wrote {len(cmds)} commands to {args.out}")
    return EXIT_OK


def cmd_serve(args, config):
    from .server import serve_stdio

    return serve_stdio(sys.stdin.buffer, sys.stdout.buffer)


_COMMANDS = {
    "edges": cmd_edges,
    "depth": cmd_depth,
    "patches": cmd_patches,
    "penalty": cmd_penalty,
    "bench": cmd_bench,
    "depth-stream": cmd_depth_stream,
    "terrain": cmd_terrain,
    "commands": cmd_commands,
    "serve": cmd_serve,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
    except Exception as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        return _COMMANDS[args.command](args, config)
    except Exception as exc:  # uniform exit-code contract
        from .commands import PatchSamplingError
        from .mesh import MeshError

        if isinstance(exc, PatchSamplingError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        if isinstance(exc, MeshError) and "empty" in str(exc):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_EMPTY
        if isinstance(exc, (MeshError, ValueError, OSError, KeyError, json.JSONDecodeError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        raise


if __name__ == "__main__":
    sys.exit(main())
