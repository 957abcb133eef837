"""Stdio session server for out-of-process batch queries.

Host processes (training loops, the TypeScript client in ``frontend/``)
talk to the toolkit over framed messages on stdin/stdout. A session owns
one immutable terrain snapshot (mesh + BVH + capsule grid + flat patches);
batched queries against it reproduce the in-process library results
bitwise for float32 payloads.

Frame layout, both directions, little-endian:

    magic  b"TPS1"
    u32    opcode (request) / status (response; 0 = ok, 1 = error)
    u32    JSON length
    u32    binary payload length
    ...    UTF-8 JSON metadata, then raw payload

Opcodes: 1 hello, 2 create_session, 3 destroy_session, 4 penetration,
5 depth, 6 commands, 7 stats, 8 shutdown. Errors carry ``{"error": msg}``
with the core validation message intact. Requests are served strictly in
order; sessions are read-only after creation, so hosts may fan queries
over any number of their own threads as long as they serialize the pipe.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import ABI_VERSION, __version__
from .bvh import TriangleBVH
from .camera import CameraModel
from .capsules import build_collision_grid
from .commands import (
    CommandConfig,
    assign_commands,
    default_patch_bounds,
    patches_array,
    sample_flat_patches,
    PatchConfig,
)
from .edges import EdgeDetectConfig, ConcatConfig, extract_edges
from .foot import VolumePointSet, foot_penalty
from .mesh import TriMesh, compute_adjacency
from .meshio import load_mesh
from .pipeline import fsim_apply, sim_config_from_dict
from .render import render_depth

SESSION_MAGIC = b"TPS1"

OP_HELLO = 1
OP_CREATE = 2
OP_DESTROY = 3
OP_PENETRATION = 4
OP_DEPTH = 5
OP_COMMANDS = 6
OP_STATS = 7
OP_SHUTDOWN = 8

STATUS_OK = 0
STATUS_ERROR = 1


def read_message(stream):
    """Read one frame; returns (code, meta_dict, payload_bytes) or None at EOF."""
    header = stream.read(16)
    if len(header) == 0:
        return None
    if len(header) < 16 or header[:4] != SESSION_MAGIC:
        raise ValueError("malformed TPS1 frame header")
    code, json_len, bin_len = struct.unpack_from("<III", header, 4)
    meta = json.loads(stream.read(json_len).decode("utf-8")) if json_len else {}
    payload = stream.read(bin_len) if bin_len else b""
    if bin_len and len(payload) < bin_len:
        raise ValueError("truncated TPS1 payload")
    return code, meta, payload


def write_message(stream, code, meta=None, payload=b""):
    body = json.dumps(meta).encode("utf-8") if meta else b"{}"
    stream.write(SESSION_MAGIC + struct.pack("<III", code, len(body), len(payload)))
    stream.write(body)
    if payload:
        stream.write(payload)
    stream.flush()


class _Session:
    def __init__(self, mesh: TriMesh, edge_cfg: EdgeDetectConfig, patch_cfg: PatchConfig | None):
        self.mesh = mesh
        self.bvh = TriangleBVH(mesh)
        edge_set = extract_edges(mesh, compute_adjacency(mesh), edge_cfg)
        self.edges = edge_set.final
        self.grid = (
            build_collision_grid(self.edges, edge_cfg.cylinder_radius, edge_cfg.grid_resolution)
            if len(self.edges)
            else None
        )
        if patch_cfg is not None:
            found = sample_flat_patches(self.bvh, patch_cfg, default_patch_bounds(mesh, patch_cfg.radius))
            self.patches = patches_array(found)
        else:
            self.patches = np.empty((0, 3))


def _edge_config(meta):
    cfg = dict(meta.get("edge_config", {}))
    concat = cfg.pop("concat", None)
    if concat is not None:
        cfg["concat"] = ConcatConfig(**concat)
    return EdgeDetectConfig(**cfg)


def _patch_config(meta):
    if "patch_config" not in meta:
        return None
    return PatchConfig(**meta["patch_config"])


def _floats(payload, offset, count):
    return np.frombuffer(payload, dtype="<f4", count=count, offset=offset)


class SessionServer:
    """Dispatches protocol requests; one instance per server process."""

    def __init__(self):
        self._sessions = {}
        self._next_id = 1
        self._created_total = 0

    # -- handlers ---------------------------------------------------------

    def hello(self, meta, payload):
        return {"abi": ABI_VERSION, "version": __version__}, b""

    def create_session(self, meta, payload):
        if "mesh_path" in meta:
            mesh = load_mesh(meta["mesh_path"])
        else:
            nv, nf = int(meta["num_vertices"]), int(meta["num_faces"])
            vertices = _floats(payload, 0, nv * 3).astype(np.float64).reshape(nv, 3)
            faces = np.frombuffer(payload, dtype="<u4", count=nf * 3, offset=nv * 12)
            mesh = TriMesh.from_arrays(vertices, faces.astype(np.int64).reshape(nf, 3))
        session = _Session(mesh, _edge_config(meta), _patch_config(meta))
        sid = self._next_id
        self._next_id += 1
        self._created_total += 1
        self._sessions[sid] = session
        return {
            "session": sid,
            "num_faces": session.mesh.num_faces,
            "num_edges": int(len(session.edges)),
            "num_patches": int(len(session.patches)),
        }, session.patches.astype("<f4").tobytes()

    def destroy_session(self, meta, payload):
        sid = int(meta["session"])
        if sid not in self._sessions:
            raise KeyError(f"unknown session {sid}")
        del self._sessions[sid]
        return {"ok": True}, b""

    def _session(self, meta):
        sid = int(meta["session"])
        if sid not in self._sessions:
            raise KeyError(f"unknown session {sid}")
        return self._sessions[sid]

    def penetration(self, meta, payload):
        session = self._session(meta)
        n = int(meta["count"])
        poses = _floats(payload, 0, n * 7).astype(np.float64).reshape(n, 7)
        twists = _floats(payload, n * 28, n * 6).astype(np.float64).reshape(n, 6)
        box = tuple(meta.get("foot_box", (0.2, 0.1, 0.05)))
        shape = tuple(meta.get("foot_shape", (5, 3, 2)))
        pts = VolumePointSet.grid(box=box, shape=shape)
        if session.grid is None:
            offsets = np.zeros((n, len(pts), 3))
            rvol = np.zeros(n)
        else:
            offsets, _, rvol = foot_penalty(session.grid, poses, twists, pts)
        out = rvol.astype("<f4").tobytes() + offsets.astype("<f4").tobytes()
        return {"points_per_foot": len(pts)}, out

    def depth(self, meta, payload):
        session = self._session(meta)
        n = int(meta["count"])
        poses = _floats(payload, 0, n * 7).astype(np.float64).reshape(n, 7)
        cam_spec = meta["camera"]
        base = CameraModel.from_fov(
            int(cam_spec["width"]),
            int(cam_spec["height"]),
            float(cam_spec["hfov"]),
            vfov=cam_spec.get("vfov"),
        )
        sim_cfg = None
        if meta.get("sim") is not None:
            sim_cfg = sim_config_from_dict(
                {"out_width": base.width, "out_height": base.height, **meta["sim"]}
            )
        seeds = meta.get("seeds")
        frames = []
        out_w, out_h = (sim_cfg.out_width, sim_cfg.out_height) if sim_cfg else (base.width, base.height)
        for k in range(n):
            cam = CameraModel.with_pose7(base, poses[k])
            img = render_depth(session.bvh, cam)
            if sim_cfg is not None:
                seed = int(seeds[k]) if seeds is not None else sim_cfg.seed
                cfg_k = sim_config_from_dict({**_plain_dict(sim_cfg), "seed": seed})
                img = fsim_apply(img, cfg_k)
                frames.append(img.values.astype("<f4"))
            else:
                # metric frames follow the file convention: misses are -1
                vals = img.values.astype("<f4").copy()
                vals[~img.valid] = -1.0
                frames.append(vals)
        payload_out = b"".join(f.tobytes() for f in frames) if frames else b""
        return {"width": out_w, "height": out_h, "count": n}, payload_out

    def commands(self, meta, payload):
        session = self._session(meta)
        n = int(meta["count"])
        poses = _floats(payload, 0, n * 7).astype(np.float64).reshape(n, 7)
        cfg = CommandConfig(**meta.get("config", {}))
        if len(session.patches) == 0:
            raise ValueError("assign_commands needs a non-empty patch set")
        rng = np.random.default_rng(meta.get("seed"))
        cmds, target_idx = assign_commands(poses, session.patches, cfg, rng)
        out = cmds.astype("<f4").tobytes() + target_idx.astype("<i4").tobytes()
        return {"count": n}, out

    def stats(self, meta, payload):
        return {
            "open_sessions": len(self._sessions),
            "created_total": self._created_total,
        }, b""

    _HANDLERS = {
        OP_HELLO: hello,
        OP_CREATE: create_session,
        OP_DESTROY: destroy_session,
        OP_PENETRATION: penetration,
        OP_DEPTH: depth,
        OP_COMMANDS: commands,
        OP_STATS: stats,
    }

    def handle(self, code, meta, payload):
        handler = self._HANDLERS.get(code)
        if handler is None:
            raise ValueError(f"unknown opcode {code}")
        return handler(self, meta, payload)


def _plain_dict(cfg):
    data = dict(cfg.__dict__)
    data.pop("noise_std_fn", None)
    return data


def serve_stdio(stdin, stdout):
    """Serve requests until shutdown or EOF. Returns the process exit code."""
    server = SessionServer()
    while True:
        message = read_message(stdin)
        if message is None:
            return 0
        code, meta, payload = message
        if code == OP_SHUTDOWN:
            write_message(stdout, STATUS_OK, {"ok": True})
            return 0
        try:
            reply, out_payload = server.handle(code, meta, payload)
            write_message(stdout, STATUS_OK, reply, out_payload)
        except Exception as exc:  # report, keep serving
            write_message(stdout, STATUS_ERROR, {"error": str(exc)})
