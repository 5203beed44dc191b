"""Synthetic domain-gap datasets for the desk-scale study.

The "target domain" is the same toy scene rendered with larger splats (so
hole statistics differ) and pushed through a fixed per-channel color curve
(standing in for a camera's white balance). Both knobs are controlled, so
blind-transfer vs histogram-matched vs adapted comparisons have ground
truth. All rendering goes through the scrforge command line; the trainer
only writes the input PLY and post-processes the rendered PNGs.
"""

from __future__ import annotations

import json
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TrainerError
from .formats import load_rgb, read_manifest, save_rgb

SCRFORGE = ("scrforge",)  # prepend e.g. ("python", "-m", "scrforge.cli") if needed


def run_scrforge(*args: str) -> None:
    cmd = [*SCRFORGE, *[str(a) for a in args]]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise TrainerError(f"{' '.join(cmd)} failed ({proc.returncode}):\n"
                           f"{proc.stderr.strip()}")


def write_room_ply(path, n_points: int = 250_000, seed: int = 0,
                   size=(6.0, 14.0, 3.0)) -> Path:
    """Binary little-endian PLY of a box room whose colors encode position.

    Per face, red ramps along one face axis and blue along the other, while
    green identifies the face (with a mild ripple for texture), so per-pixel
    color determines the surface point up to quantization. That keeps the
    coordinate-regression task solvable from local appearance and makes the
    study sensitive to color-distribution shifts.
    """
    sx, sy, sz = size
    rng = np.random.default_rng(seed)
    faces = [  # (u axis, v axis, fixed axis, fixed value, green id)
        (0, 1, 2, 0.0, 0),
        (0, 1, 2, sz, 50),
        (0, 2, 1, 0.0, 100),
        (0, 2, 1, sy, 150),
        (1, 2, 0, 0.0, 200),
        (1, 2, 0, sx, 250),
    ]
    dims = np.array([sx, sy, sz])
    areas = np.array([dims[f[0]] * dims[f[1]] for f in faces])
    counts = rng.multinomial(n_points, areas / areas.sum())
    pts, cols = [], []
    for (ua, va, fa, fval, green), count in zip(faces, counts):
        p = np.zeros((count, 3))
        s = rng.uniform(0, 1, count)
        t = rng.uniform(0, 1, count)
        p[:, ua] = s * dims[ua]
        p[:, va] = t * dims[va]
        p[:, fa] = fval
        c = np.column_stack([
            30.0 + 195.0 * s,
            green + 15.0 * np.sin(2 * np.pi * 6.0 * (s + t)),
            30.0 + 195.0 * t,
        ])
        pts.append(p)
        cols.append(np.clip(c, 0, 255))
    positions = np.concatenate(pts).astype("<f4")
    colors = np.concatenate(cols).astype(np.uint8)

    header = ("ply\nformat binary_little_endian 1.0\n"
              f"element vertex {len(positions)}\n"
              "property float x\nproperty float y\nproperty float z\n"
              "property uchar red\nproperty uchar green\nproperty uchar blue\n"
              "end_header\n")
    row = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                    ("red", "u1"), ("green", "u1"), ("blue", "u1")])
    table = np.zeros(len(positions), dtype=row)
    for j, name in enumerate(("x", "y", "z")):
        table[name] = positions[:, j]
    for j, name in enumerate(("red", "green", "blue")):
        table[name] = colors[:, j]
    path = Path(path)
    path.write_bytes(header.encode("ascii") + table.tobytes())
    return path


COLOR_CURVE_GAMMA = (0.65, 1.0, 1.7)  # per-channel, monotone


def apply_color_curve(image: np.ndarray) -> np.ndarray:
    """The fixed target-domain color curve (per-channel gamma)."""
    x = image.astype(np.float64) / 255.0
    out = np.stack([x[..., ch] ** COLOR_CURVE_GAMMA[ch] for ch in range(3)],
                   axis=-1)
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)


def _write_render_config(path, point_size_m: float, width: int, height: int,
                         focal_px: float) -> Path:
    path = Path(path)
    path.write_text(
        "[render]\n"
        f"width = {width}\nheight = {height}\n"
        f"fx = {focal_px}\nfy = {focal_px}\n"
        f"point_size_m = {point_size_m}\n")
    return path


def _curve_images_in_place(manifest_path) -> None:
    for frame in read_manifest(manifest_path):
        save_rgb(frame.rgb_path, apply_color_curve(load_rgb(frame.rgb_path)))


@dataclass(frozen=True)
class DomainDatasets:
    """Manifests of the rendered source pool, the target pool and test set
    (both color-curved), and a pose-paired probe set in both domains."""

    source_train: Path
    target_train: Path
    target_test: Path
    probe_source: Path
    probe_target: Path
    room_ply: Path


def make_domain_datasets(out_root,
                         train_frames: int = 160,
                         test_frames: int = 40,
                         probe_frames: int = 8,
                         width: int = 160,
                         height: int = 96,
                         focal_px: float = 125.0,
                         source_point_size: float = 0.014,
                         target_point_size: float = 0.04,
                         seed: int = 0) -> DomainDatasets:
    """Render both domains of the toy scene through the scrforge CLI.

    Training pools use different pose seeds (the domains are unpaired, as in
    the real problem); the probe sets share one seed so each probe pose
    exists in both domains for paired diagnostics.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    room = write_room_ply(out_root / "room.ply", seed=seed)
    src_cfg = _write_render_config(out_root / "source.toml", source_point_size,
                                   width, height, focal_px)
    tgt_cfg = _write_render_config(out_root / "target.toml", target_point_size,
                                   width, height, focal_px)

    def render(name, cfg, count, render_seed) -> Path:
        out = out_root / name
        run_scrforge("render", "--cloud", room, "--n", count, "--out", out,
                     "--seed", render_seed, "--config", cfg)
        return out / "manifest.jsonl"

    source_train = render("source_train", src_cfg, train_frames, seed + 11)
    target_train = render("target_train", tgt_cfg, train_frames, seed + 23)
    target_test = render("target_test", tgt_cfg, test_frames, seed + 37)
    probe_source = render("probe_source", src_cfg, probe_frames, seed + 51)
    probe_target = render("probe_target", tgt_cfg, probe_frames, seed + 51)

    for manifest in (target_train, target_test, probe_target):
        _curve_images_in_place(manifest)

    return DomainDatasets(source_train, target_train, target_test,
                          probe_source, probe_target, room)
