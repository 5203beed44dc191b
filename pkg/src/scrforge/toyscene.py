"""Procedural box-room point cloud for tests, demos, and the e2e pipeline.

An axis-aligned room (default 6 x 14 x 3 m) with a distinct color gradient
per wall, so every viewpoint sees an unambiguous scene-coordinate pattern.
"""

from __future__ import annotations

import numpy as np

from .geometry import CameraIntrinsics
from .pointcloud import ColorPointCloud

DEFAULT_ROOM_SIZE = (6.0, 14.0, 3.0)


def default_intrinsics(width: int = 640, height: int = 360,
                       focal_px: float = 500.0) -> CameraIntrinsics:
    return CameraIntrinsics(fx=focal_px, fy=focal_px,
                            cx=width / 2.0, cy=height / 2.0,
                            width=width, height=height)


def make_box_room(n_points: int = 200_000,
                  size: tuple[float, float, float] = DEFAULT_ROOM_SIZE,
                  seed: int = 0) -> ColorPointCloud:
    """Sample n_points uniformly over the six inner faces of a box room.

    Each face gets its own base color and a gradient along the face, giving
    the renderer and the domain-adaptation study texture to work with.
    """
    sx, sy, sz = size
    rng = np.random.default_rng(seed)
    # (u axis, v axis, fixed axis, fixed value, base RGB, gradient RGB)
    faces = [
        (0, 1, 2, 0.0, (110, 80, 40), (60, 40, 20)),     # floor: brown
        (0, 1, 2, sz, (235, 235, 235), (-60, -40, -20)),  # ceiling: white
        (0, 2, 1, 0.0, (200, 60, 60), (-120, 80, 40)),    # wall y=0: red
        (0, 2, 1, sy, (60, 160, 60), (120, -80, 80)),     # wall y=sy: green
        (1, 2, 0, 0.0, (60, 80, 200), (100, 120, -140)),  # wall x=0: blue
        (1, 2, 0, sx, (210, 190, 60), (-150, -60, 120)),  # wall x=sx: yellow
    ]
    dims = np.array([sx, sy, sz])
    areas = np.array([dims[f[0]] * dims[f[1]] for f in faces], dtype=np.float64)
    counts = rng.multinomial(n_points, areas / areas.sum())

    positions = []
    colors = []
    for (ua, va, fa, fval, base, grad), count in zip(faces, counts):
        p = np.zeros((count, 3))
        s = rng.uniform(0.0, 1.0, size=count)
        t = rng.uniform(0.0, 1.0, size=count)
        p[:, ua] = s * dims[ua]
        p[:, va] = t * dims[va]
        p[:, fa] = fval
        c = (np.asarray(base, dtype=np.float64)[None, :]
             + s[:, None] * np.asarray(grad, dtype=np.float64)[None, :]
             + 25.0 * np.sin(2.0 * np.pi * 3.0 * t)[:, None])
        positions.append(p)
        colors.append(np.clip(c, 0, 255))
    return ColorPointCloud(np.concatenate(positions).astype(np.float32),
                           np.concatenate(colors).astype(np.uint8))
