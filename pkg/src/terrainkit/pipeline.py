"""Depth processing pipelines mapping simulated and real frames into one space.

The simulation pipeline degrades clean rendered depth (crop/resize, gated
Gaussian noise, synthetic sensor artifacts, blur, clip+normalize, and a
rare whole-frame dropout); the real-world pipeline refines sensor frames
(crop/resize, inpainting of zero-valued holes, blur) and then normalizes
identically, so both land in the same [0, 1] observation space.

Also provides the strided history buffer used to assemble temporal stacks
of processed frames, and a framed stdin/stdout streaming protocol so host
processes can pipe sensor frames through the pipelines.
"""

from __future__ import annotations

import json
import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .render import DepthImage, UNIT_METERS, UNIT_NORMALIZED

STREAM_MAGIC = b"TPD1"
STREAM_FLAG_NORMALIZED = 1


@dataclass(frozen=True)
class SimPipelineConfig:
    """Degradation pipeline settings. Distances in meters, sizes in pixels.

    ``crop`` is (x0, y0, width, height) in source pixels, None for the full
    frame. Noise only perturbs pixels whose depth lies in [d_min, d_max].
    ``artifact_count`` bounds the number of overexposed mask rectangles per
    frame (drawn uniformly from 0..count, sides from ``artifact_size``,
    filled with ``artifact_fill`` or d_max). ``clip`` is the normalization
    range and defaults to (d_min, d_max). With probability ``p_ood`` the
    finished frame is replaced by clipped unit-scale Gaussian noise.
    """

    out_width: int = 36
    out_height: int = 18
    crop: tuple | None = None
    noise_std: float = 0.0
    d_min: float = 0.3
    d_max: float = 3.0
    artifact_count: int = 0
    artifact_size: tuple = (2, 8)
    artifact_fill: float | None = None
    blur_kernel: int = 1
    blur_sigma: float = 0.0
    clip: tuple | None = None
    p_ood: float = 0.0
    seed: int | None = None
    # Hook for distance-scaled noise: sigma(z) per pixel, overrides noise_std.
    noise_std_fn: object = None

    def __post_init__(self):
        _check_common(self)
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        if self.artifact_count < 0:
            raise ValueError("artifact_count must be >= 0")
        lo, hi = self.artifact_size
        if lo < 1 or hi < lo:
            raise ValueError("artifact_size must be (lo, hi) with 1 <= lo <= hi")
        if not 0.0 <= self.p_ood <= 1.0:
            raise ValueError("p_ood must be in [0, 1]")

    @property
    def clip_range(self):
        return self.clip if self.clip is not None else (self.d_min, self.d_max)


@dataclass(frozen=True)
class RealPipelineConfig:
    """Refinement pipeline settings; fields mirror the simulation side."""

    out_width: int = 36
    out_height: int = 18
    crop: tuple | None = None
    inpaint_max_iter: int = 500
    inpaint_tol: float = 1e-6
    blur_kernel: int = 1
    blur_sigma: float = 0.0
    d_min: float = 0.3
    d_max: float = 3.0
    clip: tuple | None = None

    def __post_init__(self):
        _check_common(self)
        if self.inpaint_max_iter < 1:
            raise ValueError("inpaint_max_iter must be >= 1")

    @property
    def clip_range(self):
        return self.clip if self.clip is not None else (self.d_min, self.d_max)


def _check_common(cfg):
    if cfg.out_width < 1 or cfg.out_height < 1:
        raise ValueError("output resolution must be at least 1x1")
    if cfg.blur_kernel < 1 or cfg.blur_kernel % 2 == 0:
        raise ValueError("blur_kernel must be a positive odd pixel count")
    if not 0.0 < cfg.d_min < cfg.d_max:
        raise ValueError("need 0 < d_min < d_max")
    if cfg.clip is not None and not cfg.clip[0] < cfg.clip[1]:
        raise ValueError("clip range must be increasing")


def _resample_weights(src, dst):
    """Area-overlap weights (dst, src); rows sum to 1 for full coverage."""
    scale = src / dst
    lo = np.arange(dst, dtype=np.float64)[:, None] * scale
    hi = lo + scale
    s = np.arange(src, dtype=np.float64)[None, :]
    w = np.minimum(hi, s + 1.0) - np.maximum(lo, s)
    return np.clip(w, 0.0, None) / scale


def crop_resize(img: DepthImage, region, out_width, out_height) -> DepthImage:
    """Crop to ``region`` (x0, y0, w, h; None = full) and area-resample.

    Invalid source pixels are excluded from the averages; target pixels with
    no valid coverage come out invalid (value +inf).
    """
    if region is None:
        region = (0, 0, img.width, img.height)
    x0, y0, w, h = (int(v) for v in region)
    if w <= 0 or h <= 0:
        raise ValueError("crop region must have positive area")
    if x0 < 0 or y0 < 0 or x0 + w > img.width or y0 + h > img.height:
        raise ValueError(
            f"crop region {region} outside image bounds {img.width}x{img.height}"
        )
    vals = img.values[y0 : y0 + h, x0 : x0 + w].astype(np.float64)
    valid = img.valid[y0 : y0 + h, x0 : x0 + w].astype(np.float64)
    vals = np.where(valid > 0.0, vals, 0.0)  # keep inf sentinels out of the sums
    wy = _resample_weights(h, int(out_height))
    wx = _resample_weights(w, int(out_width))
    num = wy @ (vals * valid) @ wx.T
    den = wy @ valid @ wx.T
    out_valid = den > 1e-12
    out = np.full(num.shape, np.inf)
    np.divide(num, den, out=out, where=out_valid)
    return DepthImage(out.astype(np.float32), out_valid, img.unit)


def gaussian_blur(values, kernel_size, sigma):
    """Separable Gaussian blur with edge-replicate padding."""
    kernel_size = int(kernel_size)
    if kernel_size <= 1:
        return np.asarray(values, dtype=np.float32).copy()
    if kernel_size % 2 == 0:
        raise ValueError("blur kernel size must be odd")
    if sigma <= 0.0:
        # OpenCV's default sigma for a given kernel size
        sigma = 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8
    x = np.arange(kernel_size, dtype=np.float64) - (kernel_size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    pad = kernel_size // 2
    out = np.asarray(values, dtype=np.float64)
    for axis in (0, 1):
        padded = np.pad(out, [(pad, pad) if a == axis else (0, 0) for a in (0, 1)], mode="edge")
        acc = np.zeros_like(out)
        for j in range(kernel_size):
            sl = [slice(None), slice(None)]
            sl[axis] = slice(j, j + out.shape[axis])
            acc += k[j] * padded[tuple(sl)]
        out = acc
    return out.astype(np.float32)


def _clip_normalize(values, clip_range):
    c0, c1 = clip_range
    return ((np.clip(values.astype(np.float64), c0, c1) - c0) / (c1 - c0)).astype(np.float32)


def fsim_apply(img: DepthImage, cfg: SimPipelineConfig, rng=None) -> DepthImage:
    """Degrade a metric depth frame into the normalized observation space.

    Steps, in order: crop/resize, range-gated Gaussian noise, artifact
    masks, Gaussian blur, clip+normalize, whole-frame dropout. Pixels whose
    value lies outside [d_min, d_max] are bit-unchanged by the noise step.
    Pass an ``rng`` to share a stream across frames; otherwise one is seeded
    from ``cfg.seed``.
    """
    if img.unit != UNIT_METERS:
        raise ValueError("fsim_apply expects a metric depth image")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    far = np.float32(cfg.d_max)

    work = img.copy()
    # misses and non-finite values enter the pipeline as the far clip
    bad = ~work.valid | ~np.isfinite(work.values)
    work.values[bad] = far
    work.valid &= ~bad

    work = crop_resize(work, cfg.crop, cfg.out_width, cfg.out_height)
    vals = work.values
    valid = work.valid
    vals[~valid] = far

    in_range = (vals >= cfg.d_min) & (vals <= cfg.d_max)
    n_in = int(np.count_nonzero(in_range))
    if n_in and (cfg.noise_std > 0.0 or cfg.noise_std_fn is not None):
        if cfg.noise_std_fn is not None:
            sigma = np.asarray(cfg.noise_std_fn(vals[in_range].astype(np.float64)))
            vals[in_range] += rng.standard_normal(n_in) * sigma
        else:
            vals[in_range] += rng.normal(0.0, cfg.noise_std, n_in)

    if cfg.artifact_count > 0:
        fill = far if cfg.artifact_fill is None else np.float32(cfg.artifact_fill)
        lo, hi = cfg.artifact_size
        for _ in range(int(rng.integers(0, cfg.artifact_count + 1))):
            aw = min(int(rng.integers(lo, hi + 1)), cfg.out_width)
            ah = min(int(rng.integers(lo, hi + 1)), cfg.out_height)
            ax = int(rng.integers(0, cfg.out_width - aw + 1))
            ay = int(rng.integers(0, cfg.out_height - ah + 1))
            vals[ay : ay + ah, ax : ax + aw] = fill
            valid[ay : ay + ah, ax : ax + aw] = False

    if cfg.blur_kernel > 1:
        vals = gaussian_blur(vals, cfg.blur_kernel, cfg.blur_sigma)

    vals = _clip_normalize(vals, cfg.clip_range)

    if cfg.p_ood > 0.0 and rng.random() < cfg.p_ood:
        vals = np.clip(rng.normal(0.5, 0.25, vals.shape), 0.0, 1.0).astype(np.float32)
        valid = np.ones_like(valid)

    return DepthImage(vals, valid, UNIT_NORMALIZED)


def inpaint(values, known, max_iter=500, tol=1e-6):
    """Fill unknown pixels by iterative 4-neighborhood mean diffusion.

    Runs Jacobi sweeps until every pixel is filled and the update delta
    drops below ``tol`` (or ``max_iter`` is reached). Raises ValueError when
    no pixel is known.
    """
    known = np.asarray(known, dtype=bool)
    if not known.any():
        raise ValueError("uninpaintable frame: no valid pixels")
    vals = np.asarray(values, dtype=np.float64).copy()
    vals[~known] = 0.0
    filled = known.copy()
    if filled.all():
        return vals
    for _ in range(int(max_iter)):
        num = np.zeros_like(vals)
        cnt = np.zeros_like(vals)
        num[1:, :] += np.where(filled[:-1, :], vals[:-1, :], 0.0)
        cnt[1:, :] += filled[:-1, :]
        num[:-1, :] += np.where(filled[1:, :], vals[1:, :], 0.0)
        cnt[:-1, :] += filled[1:, :]
        num[:, 1:] += np.where(filled[:, :-1], vals[:, :-1], 0.0)
        cnt[:, 1:] += filled[:, :-1]
        num[:, :-1] += np.where(filled[:, 1:], vals[:, 1:], 0.0)
        cnt[:, :-1] += filled[:, 1:]
        update = ~known & (cnt > 0)
        if not update.any():
            break
        new = num[update] / cnt[update]
        delta = float(np.max(np.abs(new - vals[update]))) if filled[update].any() else np.inf
        vals[update] = new
        filled |= update
        if filled.all() and delta < tol:
            break
    return vals


def freal_apply(img: DepthImage, cfg: RealPipelineConfig) -> DepthImage:
    """Refine a physical sensor frame into the normalized observation space.

    Zero-valued pixels are treated as missing, excluded from the resampling
    averages, recovered by diffusion inpainting, then blurred and normalized
    with the same clip range as the simulation side.
    """
    if img.unit != UNIT_METERS:
        raise ValueError("freal_apply expects a metric depth image")
    work = img.copy()
    missing = (work.values == 0.0) | ~np.isfinite(work.values) | ~work.valid
    work.valid = ~missing
    if not work.valid.any():
        raise ValueError("uninpaintable frame: no valid pixels")

    work = crop_resize(work, cfg.crop, cfg.out_width, cfg.out_height)
    vals = inpaint(work.values, work.valid, cfg.inpaint_max_iter, cfg.inpaint_tol)
    if cfg.blur_kernel > 1:
        vals = gaussian_blur(vals, cfg.blur_kernel, cfg.blur_sigma)
    vals = _clip_normalize(vals, cfg.clip_range)
    return DepthImage(vals, np.ones(vals.shape, dtype=bool), UNIT_NORMALIZED)


@dataclass(frozen=True)
class HistoryConfig:
    """Strided history: ``frames`` samples spaced ``stride`` steps apart.

    ``delay`` emulates sensor latency in steps; the covered horizon is
    (frames - 1) * stride.
    """

    frames: int = 8
    stride: int = 4
    delay: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")

    @property
    def horizon(self):
        return (self.frames - 1) * self.stride


class DepthHistory:
    """Ring buffer of processed frames indexed by monotonically growing steps.

    ``sample(t)`` returns frames at steps ``t - delay - k*stride`` for
    k = 0..frames-1, newest first; requests older than the first push clamp
    to the oldest stored frame, and requests between stored steps use the
    newest frame at or before the requested step. A single writer may push
    while one reader samples: pushes append before trimming, and trims only
    discard steps outside every reachable sample window.
    """

    def __init__(self, cfg: HistoryConfig):
        self.cfg = cfg
        self._steps: list[int] = []
        self._frames: list = []

    def __len__(self):
        return len(self._steps)

    def push(self, frame, step):
        step = int(step)
        if self._steps and step <= self._steps[-1]:
            raise ValueError(
                f"history steps must increase monotonically (got {step} after {self._steps[-1]})"
            )
        self._steps.append(step)
        self._frames.append(frame)
        window = self.cfg.delay + self.cfg.horizon
        cut = 0
        while cut < len(self._steps) - 1 and self._steps[cut + 1] <= step - window:
            cut += 1
        if cut:
            self._steps = self._steps[cut:]
            self._frames = self._frames[cut:]

    def sample(self, step):
        if not self._steps:
            raise ValueError("cannot sample an empty history")
        out = []
        for k in range(self.cfg.frames):
            want = int(step) - self.cfg.delay - k * self.cfg.stride
            idx = bisect_right(self._steps, want) - 1
            if idx < 0:
                idx = 0
            out.append(self._frames[idx])
        return out

    def push_and_sample(self, frame, step):
        self.push(frame, step)
        return self.sample(step)


def write_stream_frame(fh, values, flags=0):
    """Write one TPD1 frame: 16-byte header (magic, u32 W, u32 H, u32 flags) + f32 payload."""
    values = np.asarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ValueError("stream frames must be 2-D")
    h, w = values.shape
    fh.write(STREAM_MAGIC + struct.pack("<III", w, h, flags))
    fh.write(values.tobytes())


def read_stream_frame(fh):
    """Read one TPD1 frame; returns (values, flags) or None at end of stream."""
    header = fh.read(16)
    if len(header) == 0:
        return None
    if len(header) < 16 or header[:4] != STREAM_MAGIC:
        raise ValueError("malformed TPD1 stream header")
    w, h, flags = struct.unpack_from("<III", header, 4)
    payload = fh.read(w * h * 4)
    if len(payload) < w * h * 4:
        raise ValueError("truncated TPD1 stream payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(h, w).copy()
    return values, flags


def load_pipeline_file(path):
    """Parse a JSON or TOML pipeline config document into a plain dict.

    Recognized sections: ``sim``, ``real``, ``history``; field names match
    the config dataclasses.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _from_dict(cls, data):
    data = dict(data)
    for key in ("crop", "artifact_size", "clip"):
        if key in data and data[key] is not None:
            data[key] = tuple(data[key])
    return cls(**data)


def sim_config_from_dict(data) -> SimPipelineConfig:
    return _from_dict(SimPipelineConfig, data)


def real_config_from_dict(data) -> RealPipelineConfig:
    return _from_dict(RealPipelineConfig, data)


def history_config_from_dict(data) -> HistoryConfig:
    return _from_dict(HistoryConfig, data)
