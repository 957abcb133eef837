"""Terrain perception and foothold-safety toolkit.

Core capabilities: triangle-mesh sharp-edge detection with a capsule
spatial hash, volumetric foot-penetration penalties, emulated depth-camera
rendering with degradation pipelines, flat-patch navigation targets with
position-based velocity commands, and brute-force oracles plus benchmarks
for every accelerated query path.
"""

__version__ = "0.1.0"

# Interface revision for out-of-process consumers; bumped on any change to
# the batch array layouts or the session protocol.
ABI_VERSION = "terrainkit-abi-1"

from .mesh import FaceAdjacency, MeshError, TriMesh, compute_adjacency, merge_meshes
from .meshio import load_mesh, save_mesh
from .terrain import TerrainSpec, generate_terrain
from .edges import (
    ConcatConfig,
    EdgeDetectConfig,
    EdgeSet,
    detect_sharp_edges,
    extract_edges,
    process_edges,
    read_segments,
    write_segments,
)
from .capsules import CylinderGrid, build_collision_grid
from .foot import (
    FootState,
    PenaltyConfig,
    VolumePointSet,
    foot_penalty,
    landing_area,
    point_velocities,
    query_penetrations,
    rvol_penalty,
    world_points,
)
from .camera import CameraModel, ray_directions
from .bvh import TriangleBVH
from .render import (
    DepthImage,
    load_depth,
    radial_to_orthogonal,
    raycast_radial,
    render_depth,
    save_depth,
)
from .pipeline import (
    DepthHistory,
    HistoryConfig,
    RealPipelineConfig,
    SimPipelineConfig,
    crop_resize,
    freal_apply,
    fsim_apply,
    inpaint,
)
from .commands import (
    CommandConfig,
    FlatPatch,
    PatchConfig,
    PatchSamplingError,
    VelocityCommand,
    assign_commands,
    pd_torque,
    sample_flat_patches,
    style_reward,
    velocity_command,
)
from .bench import BenchReport, oracle_penetration, oracle_raycast, run_bench

__all__ = [
    "ABI_VERSION",
    "BenchReport",
    "CameraModel",
    "CommandConfig",
    "ConcatConfig",
    "CylinderGrid",
    "DepthHistory",
    "DepthImage",
    "EdgeDetectConfig",
    "EdgeSet",
    "FaceAdjacency",
    "FlatPatch",
    "FootState",
    "HistoryConfig",
    "MeshError",
    "PatchConfig",
    "PatchSamplingError",
    "PenaltyConfig",
    "RealPipelineConfig",
    "SimPipelineConfig",
    "TerrainSpec",
    "TriMesh",
    "TriangleBVH",
    "VelocityCommand",
    "VolumePointSet",
    "assign_commands",
    "build_collision_grid",
    "compute_adjacency",
    "crop_resize",
    "detect_sharp_edges",
    "extract_edges",
    "foot_penalty",
    "freal_apply",
    "fsim_apply",
    "generate_terrain",
    "inpaint",
    "landing_area",
    "load_depth",
    "load_mesh",
    "merge_meshes",
    "oracle_penetration",
    "oracle_raycast",
    "pd_torque",
    "point_velocities",
    "process_edges",
    "query_penetrations",
    "radial_to_orthogonal",
    "ray_directions",
    "raycast_radial",
    "read_segments",
    "render_depth",
    "rvol_penalty",
    "run_bench",
    "sample_flat_patches",
    "save_depth",
    "save_mesh",
    "style_reward",
    "velocity_command",
    "world_points",
    "write_segments",
]
