import io
import struct
import subprocess
import sys

import numpy as np
import pytest

import terrainkit as tk
from terrainkit.server import (
    OP_COMMANDS,
    OP_CREATE,
    OP_DEPTH,
    OP_DESTROY,
    OP_HELLO,
    OP_PENETRATION,
    OP_SHUTDOWN,
    OP_STATS,
    STATUS_ERROR,
    STATUS_OK,
    SessionServer,
    read_message,
    write_message,
)


@pytest.fixture(scope="module")
def server():
    return SessionServer()


@pytest.fixture(scope="module")
def stairs_session(server, stairs, tmp_path_factory):
    path = tmp_path_factory.mktemp("srv") / "stairs.obj"
    tk.save_mesh(stairs, path)
    meta, _ = server.create_session(
        {"mesh_path": str(path), "patch_config": {"radius": 0.1, "max_height_diff": 0.05, "n_targets": 8, "seed": 3}},
        b"",
    )
    return meta


def test_hello_abi(server):
    meta, _ = server.hello({}, b"")
    assert meta["abi"] == tk.ABI_VERSION


def test_create_from_path(stairs_session):
    assert stairs_session["num_edges"] > 0
    assert stairs_session["num_patches"] == 8


def test_create_from_arrays_matches_path(server, stairs, stairs_session):
    vertices = stairs.vertices.astype("<f4")
    faces = stairs.faces.astype("<u4")
    meta, _ = server.create_session(
        {"num_vertices": len(vertices), "num_faces": len(faces)},
        vertices.tobytes() + faces.tobytes(),
    )
    assert meta["num_edges"] == stairs_session["num_edges"]
    server.destroy_session({"session": meta["session"]}, b"")


def test_invalid_faces_error_message(server):
    vertices = np.zeros((3, 3), dtype="<f4")
    faces = np.array([[0, 1, 7]], dtype="<u4")
    with pytest.raises(tk.MeshError, match="out of range"):
        server.create_session({"num_vertices": 3, "num_faces": 1}, vertices.tobytes() + faces.tobytes())


def test_penetration_matches_core(server, stairs_session, stairs_edges):
    sid = stairs_session["session"]
    rng = np.random.default_rng(0)
    n = 32
    poses = np.zeros((n, 7), dtype=np.float32)
    poses[:, 0] = rng.uniform(0.8, 2.4, n)
    poses[:, 1] = rng.uniform(-0.5, 0.5, n)
    poses[:, 2] = rng.uniform(0.1, 0.6, n)
    poses[:, 3] = 1.0
    twists = rng.uniform(-1, 1, size=(n, 6)).astype(np.float32)
    meta, payload = server.penetration(
        {"session": sid, "count": n}, poses.tobytes() + twists.tobytes()
    )
    p = meta["points_per_foot"]
    rvol = np.frombuffer(payload, dtype="<f4", count=n)
    offsets = np.frombuffer(payload, dtype="<f4", offset=n * 4).reshape(n, p, 3)

    grid = tk.build_collision_grid(stairs_edges.final, 0.04, 64)
    pts = tk.VolumePointSet.grid()
    ref_off, _, ref_rvol = tk.foot_penalty(grid, poses.astype(np.float64), twists.astype(np.float64), pts)
    assert rvol.tobytes() == ref_rvol.astype("<f4").tobytes()
    assert offsets.tobytes() == ref_off.astype("<f4").tobytes()
    assert (rvol < 0).any()


def test_depth_matches_core(server, stairs_session, stairs_bvh):
    sid = stairs_session["session"]
    pose = np.array([0.5, 0.0, 1.0, 0.88, 0.0, 0.47, 0.0], dtype=np.float32)
    pose[3:7] /= np.linalg.norm(pose[3:7].astype(np.float64)).astype(np.float32)
    meta, payload = server.depth(
        {"session": sid, "count": 1, "camera": {"width": 24, "height": 12, "hfov": np.deg2rad(87)}, "sim": None},
        pose.tobytes(),
    )
    frame = np.frombuffer(payload, dtype="<f4").reshape(12, 24)
    base = tk.CameraModel.from_fov(24, 12, np.deg2rad(87))
    cam = tk.CameraModel.with_pose7(base, pose.astype(np.float64))
    ref = tk.render_depth(stairs_bvh, cam)
    expected = ref.values.astype("<f4").copy()
    expected[~ref.valid] = -1.0  # metric misses use the file convention
    assert frame.tobytes() == expected.tobytes()


def test_depth_with_pipeline_seeds(server, stairs_session):
    sid = stairs_session["session"]
    poses = np.tile(np.array([0.5, 0, 1.0, 1, 0, 0, 0], dtype=np.float32), (2, 1))
    request = {
        "session": sid,
        "count": 2,
        "camera": {"width": 16, "height": 8, "hfov": 1.2},
        "sim": {"noise_std": 0.02, "out_width": 16, "out_height": 8},
        "seeds": [7, 7],
    }
    meta, payload = server.depth(request, poses.tobytes())
    frames = np.frombuffer(payload, dtype="<f4").reshape(2, 8, 16)
    assert frames[0].tobytes() == frames[1].tobytes()  # same pose, same seed
    assert frames.min() >= 0.0 and frames.max() <= 1.0

    meta2, payload2 = server.depth({**request, "seeds": [7, 8]}, poses.tobytes())
    frames2 = np.frombuffer(payload2, dtype="<f4").reshape(2, 8, 16)
    assert frames2[0].tobytes() != frames2[1].tobytes()


def test_depth_empty_batch(server, stairs_session):
    meta, payload = server.depth(
        {"session": stairs_session["session"], "count": 0, "camera": {"width": 8, "height": 4, "hfov": 1.0}, "sim": None},
        b"",
    )
    assert meta["count"] == 0 and payload == b""


def test_commands_match_core(server, stairs_session, stairs, stairs_bvh):
    sid = stairs_session["session"]
    n = 16
    poses = np.zeros((n, 7), dtype=np.float32)
    poses[:, 0] = 0.4
    poses[:, 1] = np.linspace(-0.8, 0.8, n, dtype=np.float32)
    poses[:, 3] = 1.0
    cfg = {"k_v": 1.0, "k_omega": 1.5, "v_max": 1.2, "omega_max": 1.0, "turning_fraction": 0.25}
    meta, payload = server.commands({"session": sid, "count": n, "config": cfg, "seed": 5}, poses.tobytes())
    cmds = np.frombuffer(payload, dtype="<f4", count=n * 3).reshape(n, 3)
    idx = np.frombuffer(payload, dtype="<i4", offset=n * 12)

    patch_cfg = tk.PatchConfig(radius=0.1, max_height_diff=0.05, n_targets=8, seed=3)
    from terrainkit.commands import default_patch_bounds, patches_array

    patches = patches_array(
        tk.sample_flat_patches(stairs_bvh, patch_cfg, default_patch_bounds(stairs, 0.1))
    )
    ref_cmds, ref_idx = tk.assign_commands(
        poses.astype(np.float64), patches, tk.CommandConfig(**cfg), np.random.default_rng(5)
    )
    assert cmds.tobytes() == ref_cmds.astype("<f4").tobytes()
    np.testing.assert_array_equal(idx, ref_idx.astype(np.int32))


def test_sessions_do_not_leak(server):
    mesh = tk.generate_terrain(tk.TerrainSpec("flat"))
    vertices = mesh.vertices.astype("<f4")
    faces = mesh.faces.astype("<u4")
    before_open = server.stats({}, b"")[0]["open_sessions"]
    for _ in range(50):
        meta, _ = server.create_session(
            {"num_vertices": len(vertices), "num_faces": len(faces)},
            vertices.tobytes() + faces.tobytes(),
        )
        server.destroy_session({"session": meta["session"]}, b"")
    stats, _ = server.stats({}, b"")
    assert stats["open_sessions"] == before_open


def test_unknown_session(server):
    with pytest.raises(KeyError, match="unknown session"):
        server.penetration({"session": 999999, "count": 0}, b"")


class TestStdioRoundTrip:
    def drive(self, messages):
        request = io.BytesIO()
        for code, meta, payload in messages:
            write_message(request, code, meta, payload)
        proc = subprocess.run(
            [sys.executable, "-m", "terrainkit.cli", "serve"],
            input=request.getvalue(),
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr.decode()
        out = io.BytesIO(proc.stdout)
        replies = []
        while True:
            message = read_message(out)
            if message is None:
                return replies
            replies.append(message)

    def test_hello_create_query_shutdown(self, stairs, tmp_path):
        path = tmp_path / "stairs.obj"
        tk.save_mesh(stairs, path)
        pose = np.array([1.15, 0, 0.33, 1, 0, 0, 0], dtype="<f4")
        twist = np.zeros(6, dtype="<f4")
        replies = self.drive(
            [
                (OP_HELLO, {}, b""),
                (OP_CREATE, {"mesh_path": str(path)}, b""),
                (OP_PENETRATION, {"session": 1, "count": 1}, pose.tobytes() + twist.tobytes()),
                (OP_STATS, {}, b""),
                (OP_DESTROY, {"session": 1}, b""),
                (OP_COMMANDS, {"session": 1, "count": 0}, b""),  # destroyed: error
                (OP_SHUTDOWN, {}, b""),
            ]
        )
        codes = [r[0] for r in replies]
        assert codes == [STATUS_OK, STATUS_OK, STATUS_OK, STATUS_OK, STATUS_OK, STATUS_ERROR, STATUS_OK]
        assert replies[0][1]["abi"] == tk.ABI_VERSION
        assert replies[1][1]["session"] == 1
        assert replies[3][1]["open_sessions"] == 1
        assert "unknown session" in replies[5][1]["error"]
