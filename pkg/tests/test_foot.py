import numpy as np
import pytest

import terrainkit as tk
from terrainkit.foot import PENALTY_EPS, PenaltyConfig
from terrainkit.rotations import quat_from_yaw


def identity_pose(x=0.0, y=0.0, z=0.0):
    return np.array([x, y, z, 1.0, 0.0, 0.0, 0.0])


class TestVolumePoints:
    def test_default_grid(self):
        pts = tk.VolumePointSet.grid()
        assert len(pts) == 30
        half = np.array(pts.box) / 2
        assert np.all(np.abs(pts.points) <= half + 1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="at least 4"):
            tk.VolumePointSet(points=np.zeros((3, 3)), box=(0.2, 0.1, 0.05))

    def test_points_outside_box(self):
        pts = np.array([[0.5, 0, 0], [0, 0, 0], [0.01, 0, 0], [0, 0.01, 0]])
        with pytest.raises(ValueError, match="inside"):
            tk.VolumePointSet(points=pts, box=(0.2, 0.1, 0.05))


class TestPenetrations:
    def test_single_point_depth(self):
        grid = tk.build_collision_grid(
            np.array([[[0, 0, 0], [1, 0, 0]]], dtype=np.float64), 0.05, 4
        )
        pts = tk.VolumePointSet(
            points=np.array([[0.0, 0.0, 0.0]] * 4), box=(0.01, 0.01, 0.01)
        )
        offsets = tk.query_penetrations(grid, identity_pose(0.5, 0.0, 0.02), pts)
        assert offsets.shape == (1, 4, 3)
        np.testing.assert_allclose(np.linalg.norm(offsets[0], axis=1), 0.03, atol=1e-12)

    def test_far_points_zero(self, stairs_grid):
        pts = tk.VolumePointSet.grid()
        offsets = tk.query_penetrations(stairs_grid, identity_pose(-5.0, 0.0, 1.0), pts)
        assert np.all(offsets == 0.0)

    def test_batch_matches_oracle(self, stairs_grid, stairs_edges):
        rng = np.random.default_rng(11)
        pts = tk.VolumePointSet.grid()
        poses = np.zeros((50, 7))
        poses[:, 0] = rng.uniform(0.5, 3.0, 50)
        poses[:, 1] = rng.uniform(-0.8, 0.8, 50)
        poses[:, 2] = rng.uniform(0.0, 0.8, 50)
        yaws = rng.uniform(-np.pi, np.pi, 50)
        poses[:, 3:7] = np.stack([quat_from_yaw(y) for y in yaws])
        offsets = tk.query_penetrations(stairs_grid, poses, pts)
        world = tk.world_points(poses, pts).reshape(-1, 3)
        ref = tk.oracle_penetration(stairs_edges.final, stairs_grid.radius, world)
        assert np.abs(offsets.reshape(-1, 3) - ref).max() < 1e-9

    def test_batch_order_independent(self, stairs_grid):
        pts = tk.VolumePointSet.grid()
        poses = np.stack([identity_pose(1.0, 0.0, 0.16), identity_pose(1.3, 0.2, 0.31)])
        together = tk.query_penetrations(stairs_grid, poses, pts)
        one = tk.query_penetrations(stairs_grid, poses[0], pts)
        two = tk.query_penetrations(stairs_grid, poses[1], pts)
        assert np.array_equal(together[0], one[0])
        assert np.array_equal(together[1], two[0])


class TestRvol:
    def test_no_penetration_zero(self):
        assert tk.rvol_penalty(np.zeros((5, 3)), np.ones((5, 3))) == 0.0

    def test_single_point_value(self):
        offsets = np.array([[0.01, 0.0, 0.0]])
        velocities = np.array([[1.0, 0.0, 0.0]])
        assert abs(tk.rvol_penalty(offsets, velocities) - (-0.01001)) < 1e-12

    def test_two_point_value(self):
        offsets = np.array([[0.01, 0, 0], [0.0, 0.02, 0]])
        velocities = np.array([[1.0, 0, 0], [0.0, 0, 0]])
        expected = -(0.01 * 1.001 + 0.02 * 0.001)
        assert abs(tk.rvol_penalty(offsets, velocities) - expected) < 1e-12

    def test_scale_response(self):
        rng = np.random.default_rng(0)
        offsets = rng.normal(size=(30, 3)) * 0.01
        velocities = rng.normal(size=(30, 3))
        assert tk.rvol_penalty(2 * offsets, velocities) == pytest.approx(
            2 * tk.rvol_penalty(offsets, velocities), abs=0, rel=1e-15
        )

    def test_velocity_floor(self):
        rng = np.random.default_rng(1)
        offsets = rng.normal(size=(30, 3)) * 0.01
        depths = np.linalg.norm(offsets, axis=1)
        value = tk.rvol_penalty(offsets, np.zeros_like(offsets))
        assert abs(value + PENALTY_EPS * depths.sum()) < 1e-15

    def test_nonpositive_and_zero_iff(self):
        rng = np.random.default_rng(2)
        offsets = np.abs(rng.normal(size=(10, 3))) * 0.01
        value = tk.rvol_penalty(offsets, rng.normal(size=(10, 3)))
        assert value < 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="must match"):
            tk.rvol_penalty(np.zeros((3, 3)), np.zeros((4, 3)))

    def test_custom_eps(self):
        offsets = np.array([[0.01, 0.0, 0.0]])
        velocities = np.zeros((1, 3))
        value = tk.rvol_penalty(offsets, velocities, PenaltyConfig(eps=1e-2))
        assert abs(value + 0.01 * 0.01) < 1e-15


class TestPointVelocities:
    def test_pure_translation(self):
        pts = tk.VolumePointSet.grid()
        twist = np.array([0.5, -0.2, 0.1, 0.0, 0.0, 0.0])
        vels = tk.point_velocities(identity_pose(), twist, pts)
        np.testing.assert_allclose(vels, np.broadcast_to(twist[:3], vels.shape), atol=0)

    def test_pure_rotation_lever(self):
        pts = tk.VolumePointSet(points=np.array([[0.1, 0, 0]] * 4), box=(0.2, 0.1, 0.05))
        twist = np.array([0.0, 0, 0, 0, 0, 2.0])  # yaw rate about +z
        vels = tk.point_velocities(identity_pose(), twist, pts)
        np.testing.assert_allclose(vels[0, 0], [0.0, 0.2, 0.0], atol=1e-15)


class TestFrameInvariance:
    def test_rvol_invariant_under_yaw(self, stairs_edges):
        pts = tk.VolumePointSet.grid()
        pose = np.concatenate([[1.0, 0.1, 0.16], quat_from_yaw(0.3)])
        twist = np.array([0.4, 0.1, -0.2, 0.05, 0.0, 0.3])

        def rvol_for(segments, pose7, twist6):
            grid = tk.build_collision_grid(segments, 0.04, 64)
            _, _, rvol = tk.foot_penalty(grid, pose7, twist6, pts)
            return rvol[0]

        base = rvol_for(stairs_edges.final, pose, twist)
        yaw = 1.1
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        segs_rot = stairs_edges.final @ rot.T
        pos_rot = rot @ pose[:3]
        quat_rot = np.concatenate(
            [[np.cos((yaw + 0.3) / 2)], [0, 0], [np.sin((yaw + 0.3) / 2)]]
        )
        pose_rot = np.concatenate([pos_rot, quat_rot])
        twist_rot = np.concatenate([rot @ twist[:3], rot @ twist[3:]])
        rotated = rvol_for(segs_rot, pose_rot, twist_rot)
        assert base != 0.0
        assert abs(base - rotated) < 1e-9


@pytest.fixture(scope="module")
def box_bvh():
    mesh = tk.generate_terrain(
        tk.TerrainSpec("box", {"box_length": 1.0, "box_width": 1.0, "height": 0.3, "ground": 6.0})
    )
    return tk.TriangleBVH(mesh)


@pytest.fixture(scope="module")
def gap_bvh():
    mesh = tk.generate_terrain(tk.TerrainSpec("gap", {"gap_width": 0.5, "depth": 0.5}))
    return tk.TriangleBVH(mesh)


class TestLandingArea:
    # even x-count so a lip can split the grid exactly in half
    PTS = tk.VolumePointSet.grid(box=(0.2, 0.1, 0.05), shape=(4, 3, 2))

    def test_full_support(self, box_bvh):
        pose = identity_pose(0.0, 0.0, 0.3 + 0.025)  # sole on the box top
        assert tk.landing_area(box_bvh, pose, self.PTS) == 1.0

    def test_over_gap(self, gap_bvh):
        pose = identity_pose(2.25, 0.0, 0.025)  # centered over the 0.5 m trench
        assert tk.landing_area(gap_bvh, pose, self.PTS) == 0.0

    def test_half_on_edge(self, box_bvh):
        pose = identity_pose(0.5, 0.0, 0.3 + 0.025)  # box edge at x = 0.5
        area = tk.landing_area(box_bvh, pose, self.PTS)
        assert abs(area - 0.5) <= 1.0 / len(self.PTS)

    def test_monotone_slide_to_gap(self, gap_bvh):
        # slide from full support on the left platform out over the trench
        previous = np.inf
        for x in np.linspace(1.7, 2.25, 12):
            area = tk.landing_area(gap_bvh, identity_pose(x, 0.0, 0.025), self.PTS)
            assert area <= previous + 1e-12
            previous = area
        assert previous == 0.0
