"""Point-cloud splat renderer producing (RGB, scene-coordinate map, mask) frames.

Points are splatted as filled discs with a hard nearest-depth-wins z-buffer.
Each valid pixel stores the world coordinate of the ray through its own
center at the winning point's depth, so projecting scmap[v, u] through
(pose, intrinsics) always lands on the pixel center (u + 0.5, v + 0.5).
Pixels no disc touches are holes (mask 0, scmap sentinel (0, 0, 0)).
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import SamplingExhausted
from .geometry import CameraIntrinsics, RigidTransform, Rotation
from .manifest import FrameRecord, write_manifest
from .pointcloud import ColorPointCloud, bounding_box
from .scm import write_scm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplatConfig:
    """Disc splatting parameters.

    A point at depth z covers the disc of pixel offsets (dx, dy) with
    dx^2 + dy^2 <= (r - 1)^2 around its projected pixel, where
    r = max(1, rint(point_size_m * fx / z)), clipped to max_radius_px.
    """

    point_size_m: float = 0.01
    max_radius_px: int = 64

    def __post_init__(self) -> None:
        if self.point_size_m <= 0 or self.max_radius_px < 1:
            raise ValueError("point size and radius cap must be positive")

    def radius_px(self, fx: float, depth) -> np.ndarray:
        r = np.rint(self.point_size_m * fx / np.asarray(depth, dtype=np.float64))
        return np.clip(r, 1, self.max_radius_px).astype(np.int64)


@dataclass(frozen=True)
class PoseSamplerConfig:
    """Uniform virtual-camera distribution over a position box.

    Camera centers fall inside [aabb_min, aabb_max] with z further clamped
    to height_range. Yaw is uniform over the full circle; pitch (positive =
    looking up) and roll are uniform over symmetric ranges.
    """

    aabb_min: np.ndarray
    aabb_max: np.ndarray
    height_range: tuple[float, float] = (1.0, 1.6)
    pitch_range_deg: tuple[float, float] = (-15.0, 15.0)
    roll_range_deg: tuple[float, float] = (-5.0, 5.0)
    seed: int = 0

    def __post_init__(self) -> None:
        lo = np.asarray(self.aabb_min, dtype=np.float64).reshape(3).copy()
        hi = np.asarray(self.aabb_max, dtype=np.float64).reshape(3).copy()
        if np.any(lo > hi):
            raise ValueError("aabb_min must not exceed aabb_max")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "aabb_min", lo)
        object.__setattr__(self, "aabb_max", hi)
        if self.z_range()[0] > self.z_range()[1]:
            raise ValueError("height range does not intersect the AABB")

    def z_range(self) -> tuple[float, float]:
        return (max(self.aabb_min[2], self.height_range[0]),
                min(self.aabb_max[2], self.height_range[1]))

    @staticmethod
    def for_cloud(cloud: ColorPointCloud, shrink_m: float = 0.5,
                  **overrides) -> "PoseSamplerConfig":
        """Default sampling volume: the cloud's bounding box shrunk per side."""
        lo, hi = bounding_box(cloud)
        center = 0.5 * (lo + hi)
        lo = np.minimum(lo + shrink_m, center)
        hi = np.maximum(hi - shrink_m, center)
        return PoseSamplerConfig(aabb_min=lo, aabb_max=hi, **overrides)


def _pose_from_euler(center: np.ndarray, yaw: float, pitch: float,
                     roll: float) -> RigidTransform:
    """World-to-camera pose for a camera at `center` (radians, z-up world)."""
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    forward = np.array([cp * cy, cp * sy, sp])
    right0 = np.array([sy, -cy, 0.0])
    down0 = np.cross(forward, right0)
    cr, sr = np.cos(roll), np.sin(roll)
    right = cr * right0 + sr * down0
    down = cr * down0 - sr * right0
    r_w2c = np.stack([right, down, forward])  # rows = camera axes in world
    return RigidTransform(Rotation.from_matrix(r_w2c), -r_w2c @ center)


def _draw_pose(rng: np.random.Generator, cfg: PoseSamplerConfig) -> RigidTransform:
    zlo, zhi = cfg.z_range()
    center = np.array([
        rng.uniform(cfg.aabb_min[0], cfg.aabb_max[0]),
        rng.uniform(cfg.aabb_min[1], cfg.aabb_max[1]),
        rng.uniform(zlo, zhi),
    ])
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    pitch = np.radians(rng.uniform(*cfg.pitch_range_deg))
    roll = np.radians(rng.uniform(*cfg.roll_range_deg))
    return _pose_from_euler(center, yaw, pitch, roll)


def sample_poses(cfg: PoseSamplerConfig, n: int) -> list[RigidTransform]:
    """Draw n camera poses; identical seeds give identical lists."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(cfg.seed)
    return [_draw_pose(rng, cfg) for _ in range(n)]


@dataclass(frozen=True)
class SceneCoordFrame:
    """A rendered frame: image, per-pixel world coordinates, validity, pose."""

    rgb: np.ndarray     # (H, W, 3) uint8
    scmap: np.ndarray   # (H, W, 3) float32, world meters; (0,0,0) where invalid
    mask: np.ndarray    # (H, W) uint8, 1 = valid
    pose: RigidTransform
    intrinsics: CameraIntrinsics

    def valid_fraction(self) -> float:
        return float(np.count_nonzero(self.mask)) / self.mask.size


def render(cloud: ColorPointCloud,
           pose: RigidTransform,
           intr: CameraIntrinsics,
           cfg: SplatConfig = SplatConfig()) -> SceneCoordFrame:
    """Render the cloud from a virtual camera.

    Every point with positive camera-space depth is splatted as a filled
    disc; per pixel the smallest depth wins color and coordinate. An empty
    cloud (or one fully behind the camera) yields an all-invalid frame.
    """
    w, h = intr.width, intr.height
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    scmap = np.zeros((h, w, 3), dtype=np.float32)
    mask = np.zeros((h, w), dtype=np.uint8)
    frame = SceneCoordFrame(rgb, scmap, mask, pose, intr)
    if len(cloud) == 0:
        return frame

    cam = pose.apply(cloud.positions.astype(np.float64))
    z = cam[:, 2]
    front = z > 1e-9
    if not np.any(front):
        return frame
    cam = cam[front]
    z = z[front]
    colors = cloud.colors[front]

    u = intr.fx * cam[:, 0] / z + intr.cx
    v = intr.fy * cam[:, 1] / z + intr.cy
    ui = np.floor(u).astype(np.int64)
    vi = np.floor(v).astype(np.int64)
    radius = cfg.radius_px(intr.fx, z)

    reach = radius - 1
    keep = ((ui >= -reach) & (ui < w + reach) &
            (vi >= -reach) & (vi < h + reach))
    if not np.any(keep):
        return frame
    ui, vi, z, radius, colors = ui[keep], vi[keep], z[keep], radius[keep], colors[keep]

    pix_parts, z_parts, src_parts = [], [], []
    for rad in np.unique(radius):
        sel = radius == rad
        cu, cv = ui[sel], vi[sel]
        if rad == 1:
            dxs = np.array([0])
            dys = np.array([0])
        else:
            off = np.arange(-rad + 1, rad)
            dy, dx = np.meshgrid(off, off, indexing="ij")
            disc = dx * dx + dy * dy <= (rad - 1) ** 2
            dxs, dys = dx[disc], dy[disc]
        pu = cu[:, None] + dxs[None, :]
        pv = cv[:, None] + dys[None, :]
        inside = (pu >= 0) & (pu < w) & (pv >= 0) & (pv < h)
        pix_parts.append((pv * w + pu)[inside])
        counts = inside.sum(axis=1)
        z_parts.append(np.repeat(z[sel], counts))
        src_parts.append(np.repeat(np.flatnonzero(sel), counts))

    pix = np.concatenate(pix_parts)
    if len(pix) == 0:
        return frame
    depth = np.concatenate(z_parts)
    src = np.concatenate(src_parts)

    # z-buffer: stable sort by (pixel, depth); first entry per pixel wins
    order = np.lexsort((depth, pix))
    pix_sorted = pix[order]
    lead = np.r_[True, pix_sorted[1:] != pix_sorted[:-1]]
    win = order[lead]
    win_pix = pix[win]
    win_z = depth[win]

    rows = win_pix // w
    cols = win_pix % w
    rgb[rows, cols] = colors[src[win]]
    mask[rows, cols] = 1

    # scene coordinate = pixel-center ray at the winning depth, in world frame
    cam_pts = np.column_stack([
        (cols + 0.5 - intr.cx) / intr.fx * win_z,
        (rows + 0.5 - intr.cy) / intr.fy * win_z,
        win_z,
    ])
    scmap[rows, cols] = pose.inverse().apply(cam_pts).astype(np.float32)
    return frame


def _worker_count() -> int:
    cap = os.environ.get("SCRFORGE_THREADS")
    if cap is not None:
        return max(1, int(cap))
    return min(os.cpu_count() or 1, 8)


def render_dataset(cloud: ColorPointCloud,
                   sampler: PoseSamplerConfig,
                   intr: CameraIntrinsics,
                   splat: SplatConfig,
                   n: int,
                   out_dir,
                   min_valid_fraction: float = 0.05,
                   max_retries: int = 10) -> Path:
    """Render n frames to out_dir and write a JSONL manifest.

    Each frame draws poses from its own deterministic substream, retrying
    (up to max_retries) any pose whose frame has fewer than
    min_valid_fraction valid pixels, so output is identical for any worker
    count. Returns the manifest path.

    Raises:
        SamplingExhausted: a frame failed the validity floor max_retries times.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = np.random.SeedSequence(sampler.seed).spawn(max(n, 1))

    def make_frame(index: int) -> FrameRecord:
        rng = np.random.default_rng(streams[index])
        frame = None
        for attempt in range(max_retries):
            pose = _draw_pose(rng, sampler)
            frame = render(cloud, pose, intr, splat)
            if frame.valid_fraction() >= min_valid_fraction:
                if attempt:
                    logger.info("frame %d: %d re-sample(s) before reaching "
                                "%.0f%% validity", index, attempt,
                                100 * min_valid_fraction)
                break
        else:
            raise SamplingExhausted(
                f"frame {index}: no pose reached {min_valid_fraction:.0%} "
                f"validity in {max_retries} tries")
        name = f"{index:06d}"
        Image.fromarray(frame.rgb).save(out_dir / f"{name}.png")
        write_scm(out_dir / f"{name}.scm", frame.scmap, frame.mask)
        return FrameRecord(frame_id=name, rgb=f"{name}.png", scmap=f"{name}.scm",
                           pose=frame.pose, intrinsics=intr)

    workers = _worker_count()
    if n == 0:
        records: list[FrameRecord] = []
    elif workers == 1:
        records = [make_frame(i) for i in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(make_frame, range(n)))

    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(manifest_path, records)
    return manifest_path
