"""Sharp-edge detection and greedy polyline concatenation.

Edge segments are stored as float64 arrays of shape (N, 2, 3): two world
points per segment. Detection keeps exactly the interior mesh edges whose
dihedral angle exceeds a sharpness threshold; the concatenation pass then
merges chains of collinear-enough segments into long chords to cut the
number of collision primitives.
"""

from __future__ import annotations

import heapq
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .mesh import FaceAdjacency, TriMesh, WELD_TOL

TPE_MAGIC = b"TPE1"

# Default tuning: stair lips (90 deg) clear the sharpness threshold with
# margin, capsules reach about half a foot length, and merging tolerates
# a centimeter of waviness.
DEFAULT_SHARPNESS = np.deg2rad(30.0)
DEFAULT_RADIUS = 0.04
DEFAULT_GRID_RES = 64


@dataclass(frozen=True)
class ConcatConfig:
    """Greedy concatenation parameters.

    angle_thresh: maximum direction change (radians) accepted when growing a
        polyline; growth stops when alignment drops to cos(angle_thresh) or
        below.
    min_points: polylines shorter than this many points pass through
        unmerged.
    tolerance: maximum distance (meters) of interior points from a merged
        chord.
    """

    angle_thresh: float = np.deg2rad(15.0)
    min_points: int = 3
    tolerance: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.angle_thresh <= np.pi / 2:
            raise ValueError("angle_thresh must be in (0, pi/2]")
        if self.min_points < 2:
            raise ValueError("min_points must be >= 2")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class EdgeDetectConfig:
    """End-to-end edge extraction parameters (detection, merging, grid)."""

    sharpness_thresh: float = DEFAULT_SHARPNESS  # radians
    cylinder_radius: float = DEFAULT_RADIUS  # meters
    grid_resolution: int = DEFAULT_GRID_RES  # cells per axis
    concat: ConcatConfig = field(default_factory=ConcatConfig)

    def __post_init__(self):
        if not 0.0 < self.sharpness_thresh < np.pi:
            raise ValueError("sharpness_thresh must be in (0, pi)")
        if self.cylinder_radius <= 0.0:
            raise ValueError("cylinder_radius must be positive")
        if self.grid_resolution < 1:
            raise ValueError("grid_resolution must be >= 1")


@dataclass(frozen=True)
class EdgeSet:
    """Detected raw segments and their merged final form."""

    raw: np.ndarray  # (R, 2, 3)
    final: np.ndarray  # (K, 2, 3)

    def __post_init__(self):
        if (len(self.final) == 0) != (len(self.raw) == 0):
            raise ValueError("final edge set must be empty exactly when raw is empty")


def empty_segments():
    return np.empty((0, 2, 3), dtype=np.float64)


def as_segments(arr):
    """Validate/coerce an (N, 2, 3) segment array; rejects zero-length segments."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.size == 0:
        return empty_segments()
    if arr.ndim != 3 or arr.shape[1:] != (2, 3):
        raise ValueError(f"segments must have shape (N, 2, 3), got {arr.shape}")
    lengths = np.linalg.norm(arr[:, 1] - arr[:, 0], axis=1)
    if np.any(lengths <= 1e-9):
        raise ValueError("zero-length edge segment")
    return arr


def canonical_segments(segments):
    """Endpoint-sorted, lexicographically ordered copy for set comparisons."""
    segments = np.asarray(segments, dtype=np.float64)
    if len(segments) == 0:
        return empty_segments()
    a, b = segments[:, 0], segments[:, 1]
    flip = _lexgt(a, b)
    out = segments.copy()
    out[flip] = out[flip][:, ::-1]
    order = np.lexsort(
        (out[:, 1, 2], out[:, 1, 1], out[:, 1, 0], out[:, 0, 2], out[:, 0, 1], out[:, 0, 0])
    )
    return out[order]


def _lexgt(a, b):
    """Rowwise lexicographic a > b for (N, 3) arrays."""
    gt = np.zeros(len(a), dtype=bool)
    undecided = np.ones(len(a), dtype=bool)
    for k in range(3):
        gt |= undecided & (a[:, k] > b[:, k])
        undecided &= a[:, k] == b[:, k]
    return gt


def detect_sharp_edges(mesh: TriMesh, adjacency: FaceAdjacency, sharpness_thresh) -> np.ndarray:
    """Interior edges whose dihedral angle strictly exceeds the threshold.

    Returns deduplicated segments (N, 2, 3) in canonical order; empty when
    the mesh has no sharp features.
    """
    keep = adjacency.dihedral > sharpness_thresh
    pairs = adjacency.shared_edges[keep]
    if len(pairs) == 0:
        return empty_segments()
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    return canonical_segments(mesh.vertices[pairs])


def segment_point_distance(points, a, b):
    """Distance from each point (N, 3) to the segment a-b (degenerate-safe)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-24:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(points - closest, axis=1)


def process_edges(raw, cfg: ConcatConfig = ConcatConfig()) -> np.ndarray:
    """Merge fragmented segments into long chords (greedy concatenation).

    Builds a vertex-adjacency graph over shared endpoints, greedily grows
    polylines from the lexicographically smallest available vertex by
    extending head and tail toward the best-aligned neighbor while the
    alignment exceeds cos(angle_thresh), then replaces each polyline of at
    least ``min_points`` points by maximal straight chords: repeatedly the
    longest trailing run whose interior points all lie within ``tolerance``
    of the chord. Leftover runs and short polylines pass through unmerged.

    Every input segment midpoint stays within ``tolerance`` of some output
    segment.
    """
    raw = as_segments(raw)
    if len(raw) == 0:
        return empty_segments()

    # endpoint -> vertex id, ids ordered lexicographically by position
    pts = raw.reshape(-1, 3)
    keys = np.round(pts / WELD_TOL).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    positions = np.empty((len(uniq), 3), dtype=np.float64)
    positions[inverse] = pts  # representative coordinates per welded vertex

    adj: list[set] = [set() for _ in range(len(uniq))]
    seg_ends = inverse.reshape(-1, 2)
    out: list[tuple[np.ndarray, np.ndarray]] = []
    for k, (u, w) in enumerate(seg_ends):
        if u == w:
            out.append((raw[k, 0], raw[k, 1]))  # below weld resolution; pass through
            continue
        adj[u].add(int(w))
        adj[w].add(int(u))

    cos_thresh = np.cos(cfg.angle_thresh)

    def unit(v):
        return v / np.linalg.norm(v)

    def best_neighbor(end, direction):
        # ascending id scan keeps the lowest index on near-ties
        best, best_align = -1, -np.inf
        for cand in sorted(adj[end]):
            align = float(np.dot(direction, unit(positions[cand] - positions[end])))
            if align > best_align + 1e-12:
                best, best_align = cand, align
        return best, best_align

    def consume(u, w):
        adj[u].discard(w)
        adj[w].discard(u)

    heap = [v for v in range(len(uniq)) if adj[v]]
    heapq.heapify(heap)
    while heap:
        v = heapq.heappop(heap)
        if not adj[v]:
            continue
        first = min(adj[v])
        consume(v, first)
        chain = [v, first]
        extended = True
        while extended:
            extended = False
            for head in (True, False):
                end = chain[0] if head else chain[-1]
                prev = chain[1] if head else chain[-2]
                direction = unit(positions[end] - positions[prev])
                cand, align = best_neighbor(end, direction)
                if cand >= 0 and align > cos_thresh:
                    consume(end, cand)
                    if head:
                        chain.insert(0, cand)
                    else:
                        chain.append(cand)
                    extended = True
        run = positions[np.asarray(chain)]
        while len(run) >= cfg.min_points:
            tail = run[-1]
            pick = len(run) - 2
            for i in range(len(run) - 2):
                if np.max(segment_point_distance(run[i:-1], run[i], tail)) < cfg.tolerance:
                    pick = i
                    break
            out.append((run[pick], tail))
            run = run[: pick + 1]
        for a, b in zip(run[:-1], run[1:]):
            out.append((a, b))
        if adj[v]:
            heapq.heappush(heap, v)  # junction vertex can seed again

    return np.asarray(out, dtype=np.float64).reshape(-1, 2, 3)


def extract_edges(mesh: TriMesh, adjacency: FaceAdjacency, cfg: EdgeDetectConfig) -> EdgeSet:
    """Detect sharp edges and merge them; both stages of the extraction."""
    raw = detect_sharp_edges(mesh, adjacency, cfg.sharpness_thresh)
    if len(raw) == 0:
        return EdgeSet(raw=raw, final=empty_segments())
    return EdgeSet(raw=raw, final=process_edges(raw, cfg.concat))


def segments_to_json(segments) -> str:
    """JSON array of ``{"a": [x,y,z], "b": [x,y,z]}`` objects."""
    payload = [{"a": list(map(float, s[0])), "b": list(map(float, s[1]))} for s in segments]
    return json.dumps(payload)


def segments_from_json(text) -> np.ndarray:
    payload = json.loads(text)
    if not payload:
        return empty_segments()
    return as_segments(np.asarray([[e["a"], e["b"]] for e in payload], dtype=np.float64))


def write_segments(segments, path) -> None:
    """Write segments as JSON (``.json``) or binary TPE1 (anything else)."""
    path_str = str(path)
    if path_str.lower().endswith(".json"):
        with open(path_str, "w", encoding="utf-8") as fh:
            fh.write(segments_to_json(segments))
    else:
        with open(path_str, "wb") as fh:
            fh.write(TPE_MAGIC)
            fh.write(struct.pack("<I", len(segments)))
            fh.write(np.asarray(segments, dtype="<f4").tobytes())


def read_segments(path) -> np.ndarray:
    path_str = str(path)
    if path_str.lower().endswith(".json"):
        with open(path_str, "r", encoding="utf-8") as fh:
            return segments_from_json(fh.read())
    with open(path_str, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != TPE_MAGIC:
        raise ValueError(f"{path}: not a TPE1 edge file")
    (count,) = struct.unpack_from("<I", raw, 4)
    data = np.frombuffer(raw, dtype="<f4", count=count * 6, offset=8)
    return data.reshape(count, 2, 3).astype(np.float64)
