"""Brute-force reference implementations and throughput measurement.

The oracles ship with the library (not only in the test suite) so
installations can self-verify: each accelerated query path has an
exhaustive counterpart here that must agree within tight tolerances.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict

import numpy as np

from .bvh import BARY_TOL, DET_EPS, RAY_EPS, TriangleBVH
from .camera import CameraModel, ray_directions
from .capsules import build_collision_grid
from .edges import extract_edges, EdgeDetectConfig
from .mesh import TriMesh, compute_adjacency
from .pipeline import SimPipelineConfig, fsim_apply
from .render import raycast_radial, radial_to_orthogonal
from .terrain import TerrainSpec, generate_terrain


def oracle_penetration(segments, radius, points):
    """Exhaustive capsule penetration offsets; ground truth for grid queries.

    Scans every capsule per point (lowest index wins distance ties) and
    returns the same minimum-norm exit translations the grid computes.
    Empty segment lists yield all-zero offsets.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    segments = np.asarray(segments, dtype=np.float64).reshape(-1, 2, 3)
    offsets = np.zeros((len(points), 3), dtype=np.float64)
    if len(segments) == 0:
        return offsets
    a = segments[:, 0]
    ab = segments[:, 1] - segments[:, 0]
    denom = np.einsum("kj,kj->k", ab, ab)
    denom = np.where(denom > 1e-24, denom, 1.0)
    # (N, K) closest-point parameters, clamped to the segment
    t = np.clip(np.einsum("nkj,kj->nk", points[:, None, :] - a[None, :, :], ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    diff = points[:, None, :] - closest
    dist = np.linalg.norm(diff, axis=2)
    best = np.argmin(dist, axis=1)  # first minimum = lowest capsule index
    rows = np.arange(len(points))
    best_dist = dist[rows, best]
    hit = best_dist < radius
    depth = radius - best_dist[hit]
    direction = diff[rows[hit], best[hit]]
    norms = best_dist[hit]
    on_axis = norms <= 1e-15
    safe = np.where(on_axis, 1.0, norms)
    offsets[rows[hit]] = direction / safe[:, None] * depth[:, None]
    offsets[rows[hit][on_axis]] = np.array([0.0, 0.0, 1.0]) * depth[on_axis, None]
    return offsets


def oracle_raycast(mesh: TriMesh, origins, dirs, chunk=4_000_000):
    """Exhaustive closest-hit ray-triangle intersection (same hit rules as the BVH).

    Returns (t, tri) with t = inf and tri = -1 on miss.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    tri = mesh.vertices[mesh.faces]
    v0 = tri[:, 0]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    n_rays = len(origins)
    n_tris = len(v0)
    best_t = np.full(n_rays, np.inf)
    best_tri = np.full(n_rays, -1, dtype=np.int64)
    rows_per_chunk = max(1, int(chunk // max(n_tris, 1)))
    for start in range(0, n_rays, rows_per_chunk):
        stop = min(start + rows_per_chunk, n_rays)
        o = origins[start:stop, None, :]
        d = dirs[start:stop, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            pvec = np.cross(d, e2[None, :, :])
            det = np.einsum("rkj,kj->rk", pvec, e1)
            inv = np.where(np.abs(det) >= DET_EPS, 1.0 / np.where(det == 0.0, 1.0, det), np.nan)
            tvec = o - v0[None, :, :]
            u = np.einsum("rkj,rkj->rk", tvec, pvec) * inv
            qvec = np.cross(tvec, e1[None, :, :])
            v = np.einsum("rkj,rkj->rk", d, qvec) * inv
            t = np.einsum("kj,rkj->rk", e2, qvec) * inv
        ok = (
            (u >= -BARY_TOL)
            & (u <= 1.0 + BARY_TOL)
            & (v >= -BARY_TOL)
            & (u + v <= 1.0 + BARY_TOL)
            & (t > RAY_EPS)
        )
        t = np.where(ok, t, np.inf)
        idx = np.argmin(t, axis=1)
        rr = np.arange(stop - start)
        tmin = t[rr, idx]
        hit = np.isfinite(tmin)
        best_t[start:stop] = tmin
        best_tri[start:stop][hit] = idx[hit]
        best_tri[start:stop][~hit] = -1
    return best_t, best_tri


def brute_force_adjacency(mesh: TriMesh):
    """O(F^2) face-pair scan; returns (face_pairs, shared_edges, dihedral).

    Reference for :func:`terrainkit.mesh.compute_adjacency` on small meshes.
    Pairs sharing exactly two vertices count as adjacent; edges shared by
    more than two faces are excluded, mirroring the manifold rule.
    """
    faces = mesh.faces
    normals = mesh.face_normals
    pairs = []
    shared = []
    edge_owner_count: dict = {}
    for i in range(len(faces)):
        si = set(int(v) for v in faces[i])
        for e in ((faces[i][0], faces[i][1]), (faces[i][1], faces[i][2]), (faces[i][2], faces[i][0])):
            key = (min(int(e[0]), int(e[1])), max(int(e[0]), int(e[1])))
            edge_owner_count[key] = edge_owner_count.get(key, 0) + 1
        for j in range(i + 1, len(faces)):
            common = si & set(int(v) for v in faces[j])
            if len(common) == 2:
                pairs.append((i, j))
                shared.append(tuple(sorted(common)))
    keep = [k for k, s in enumerate(shared) if edge_owner_count.get(s, 0) <= 2]
    pairs = [pairs[k] for k in keep]
    shared = [shared[k] for k in keep]
    if not pairs:
        return (
            np.empty((0, 2), np.int64),
            np.empty((0, 2), np.int64),
            np.empty(0, np.float64),
        )
    pairs = np.asarray(pairs, dtype=np.int64)
    shared = np.asarray(shared, dtype=np.int64)
    cosang = np.clip(np.einsum("ij,ij->i", normals[pairs[:, 0]], normals[pairs[:, 1]]), -1.0, 1.0)
    return pairs, shared, np.arccos(cosang)


@dataclass(frozen=True)
class BenchReport:
    """One benchmark measurement with its correctness cross-check."""

    operation: str
    batch_size: int
    wall_time_s: float  # median over runs
    throughput: float
    throughput_unit: str
    max_deviation: float
    runs: int
    threads: int

    def to_json_line(self):
        return json.dumps(asdict(self))


def format_table(reports):
    header = f"{'operation':<22}{'batch':>10}{'median [ms]':>14}{'throughput':>16}  {'unit':<12}{'max dev':>12}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.operation:<22}{r.batch_size:>10}{r.wall_time_s * 1e3:>14.3f}"
            f"{r.throughput:>16.1f}  {r.throughput_unit:<12}{r.max_deviation:>12.3e}"
        )
    return "\n".join(lines)


def _median_time(fn, repeats, warmup=1):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _bench_terrain():
    # ~65k triangles, comfortably under the 100k budget
    return generate_terrain(TerrainSpec("rough", {"size": 8.0, "cells": 180, "amplitude": 0.04, "seed": 11}))


def bench_depth(sizes, repeats=5, threads=1):
    """Render + simulation-pipeline latency per frame (frames/s)."""
    mesh = _bench_terrain()
    bvh = TriangleBVH(mesh)
    reports = []
    for size in sizes:
        w, h = size
        cam = CameraModel.looking(w, h, np.deg2rad(87.0), position=(0.0, 0.0, 1.2), forward=(0.8, 0.0, -0.6))
        cfg = SimPipelineConfig(out_width=w, out_height=h, noise_std=0.02, artifact_count=3, blur_kernel=3, blur_sigma=1.0, seed=7)
        rng = np.random.default_rng(7)

        def frame():
            radial = raycast_radial(bvh, cam)
            ortho = radial_to_orthogonal(radial, cam)
            return fsim_apply(ortho, cfg, rng)

        median = _median_time(frame, repeats)
        sub = slice(0, min(256, w * h))
        dirs = ray_directions(cam).reshape(-1, 3)[sub]
        origins = np.broadcast_to(cam.position, dirs.shape)
        t_oracle, _ = oracle_raycast(mesh, origins, dirs)
        t_fast, _ = bvh.raycast(origins, dirs)
        finite = np.isfinite(t_oracle)
        deviation = float(np.max(np.abs(t_fast[finite] - t_oracle[finite]))) if finite.any() else 0.0
        reports.append(
            BenchReport(
                operation="render+fsim",
                batch_size=w * h,
                wall_time_s=median,
                throughput=1.0 / median,
                throughput_unit="frames/s",
                max_deviation=deviation,
                runs=repeats,
                threads=threads,
            )
        )
    return reports


def bench_penetration(sizes, repeats=5, threads=1):
    """Capsule-grid query throughput (queries/s) with an oracle subsample."""
    mesh = generate_terrain(TerrainSpec("stairs"))
    adjacency = compute_adjacency(mesh)
    edge_set = extract_edges(mesh, adjacency, EdgeDetectConfig())
    grid = build_collision_grid(edge_set.final, 0.04, 64)
    lo, hi = mesh.bounds()
    rng = np.random.default_rng(3)
    reports = []
    for n in sizes:
        points = rng.uniform(lo - 0.1, hi + 0.1, size=(int(n), 3))
        median = _median_time(lambda: grid.query_offsets(points), repeats)
        sub = points[: min(10_000, len(points))]
        deviation = float(np.max(np.abs(grid.query_offsets(sub) - oracle_penetration(edge_set.final, grid.radius, sub))))
        reports.append(
            BenchReport(
                operation="grid_penetration",
                batch_size=int(n),
                wall_time_s=median,
                throughput=int(n) / median,
                throughput_unit="queries/s",
                max_deviation=deviation,
                runs=repeats,
                threads=threads,
            )
        )
    return reports


def bench_raycast(sizes, repeats=5, threads=1):
    """BVH ray throughput (rays/s) with an oracle subsample."""
    mesh = _bench_terrain()
    bvh = TriangleBVH(mesh)
    lo, hi = mesh.bounds()
    rng = np.random.default_rng(5)
    reports = []
    for n in sizes:
        n = int(n)
        origins = rng.uniform(lo, hi, size=(n, 3))
        origins[:, 2] = hi[2] + 1.0
        dirs = rng.normal(size=(n, 3))
        dirs[:, 2] = -np.abs(dirs[:, 2]) - 0.5
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        median = _median_time(lambda: bvh.raycast(origins, dirs), repeats)
        sub = min(2000, n)
        t_fast, _ = bvh.raycast(origins[:sub], dirs[:sub])
        t_ref, _ = oracle_raycast(mesh, origins[:sub], dirs[:sub])
        both = np.isfinite(t_fast) & np.isfinite(t_ref)
        deviation = float(np.max(np.abs(t_fast[both] - t_ref[both]))) if both.any() else 0.0
        reports.append(
            BenchReport(
                operation="bvh_raycast",
                batch_size=n,
                wall_time_s=median,
                throughput=n / median,
                throughput_unit="rays/s",
                max_deviation=deviation,
                runs=repeats,
                threads=threads,
            )
        )
    return reports


_SUITES = {
    "depth": bench_depth,
    "penetration": bench_penetration,
    "raycast": bench_raycast,
}


def run_bench(suite, sizes, repeats=5, threads=None):
    """Run a named suite over the given sizes.

    ``sizes``: (width, height) pairs for the depth suite, point/ray counts
    otherwise. Warm-up runs are excluded; the median of ``repeats`` timed
    runs is reported together with the worst deviation against the oracle
    subsample.
    """
    if suite not in _SUITES:
        raise ValueError(f"unknown bench suite {suite!r}; expected one of {sorted(_SUITES)}")
    if threads is not None:
        import numba

        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    else:
        import numba

        threads = numba.get_num_threads()
    if not sizes:
        return []
    return _SUITES[suite](sizes, repeats=repeats, threads=int(threads))
