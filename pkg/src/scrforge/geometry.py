"""SE(3) rigid transforms, rotations, and the pinhole camera model.

Conventions used throughout the package:
  - poses are world-to-camera: p_cam = R @ p_world + t
  - the camera center in world coordinates is C = -R.T @ t
  - camera frame: x right, y down, z forward (optical axis)
  - image frame: u right, v down, pixel (u, v) spans [u, u+1) x [v, v+1)
    with its center at (u + 0.5, v + 0.5)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, NonPositiveDepth


def _unit_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("quaternion must be finite and non-zero")
    q = q / n
    if q[0] < 0.0:  # canonical sign so serialization is deterministic
        q = -q
    q.flags.writeable = False
    return q


@dataclass(frozen=True)
class Rotation:
    """3D rotation stored as a unit quaternion (w, x, y, z) with w >= 0."""

    quat: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "quat", _unit_quat(self.quat))

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_axis_angle(axis, angle_rad: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64).reshape(3)
        n = np.linalg.norm(axis)
        if n == 0.0:
            raise ValueError("rotation axis must be non-zero")
        half = 0.5 * float(angle_rad)
        return Rotation(np.concatenate(([np.cos(half)], np.sin(half) / n * axis)))

    @staticmethod
    def from_matrix(m) -> "Rotation":
        """Convert a proper rotation matrix to a quaternion (Shepperd's method)."""
        m = np.asarray(m, dtype=np.float64).reshape(3, 3)
        t = np.trace(m)
        if t > 0.0:
            s = np.sqrt(t + 1.0) * 2.0
            q = np.array([0.25 * s,
                          (m[2, 1] - m[1, 2]) / s,
                          (m[0, 2] - m[2, 0]) / s,
                          (m[1, 0] - m[0, 1]) / s])
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q = np.array([(m[2, 1] - m[1, 2]) / s,
                          0.25 * s,
                          (m[0, 1] + m[1, 0]) / s,
                          (m[0, 2] + m[2, 0]) / s])
        elif m[1, 1] >= m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q = np.array([(m[0, 2] - m[2, 0]) / s,
                          (m[0, 1] + m[1, 0]) / s,
                          0.25 * s,
                          (m[1, 2] + m[2, 1]) / s])
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q = np.array([(m[1, 0] - m[0, 1]) / s,
                          (m[0, 2] + m[2, 0]) / s,
                          (m[1, 2] + m[2, 1]) / s,
                          0.25 * s])
        return Rotation(q)

    def matrix(self) -> np.ndarray:
        w, x, y, z = self.quat
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def apply(self, points) -> np.ndarray:
        """Rotate one (3,) point or an (N, 3) batch."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.matrix().T

    def compose(self, other: "Rotation") -> "Rotation":
        """Hamilton product: self.compose(other) rotates by `other` first."""
        w1, x1, y1, z1 = self.quat
        w2, x2, y2, z2 = other.quat
        return Rotation(np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]))

    def inverse(self) -> "Rotation":
        w, x, y, z = self.quat
        return Rotation(np.array([w, -x, -y, -z]))


@dataclass(frozen=True)
class RigidTransform:
    """World-to-camera SE(3) pose: p_cam = R @ p_world + t."""

    rotation: Rotation
    translation: np.ndarray  # (3,) meters

    def __post_init__(self) -> None:
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(Rotation.identity(), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return self.rotation.apply(points) + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return the transform mapping p to self(other(p))."""
        return RigidTransform(
            self.rotation.compose(other.rotation),
            self.rotation.apply(other.translation) + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rinv = self.rotation.inverse()
        return RigidTransform(rinv, -rinv.apply(self.translation))

    def camera_center(self) -> np.ndarray:
        """Camera center in world coordinates, C = -R.T @ t."""
        return -self.rotation.inverse().apply(self.translation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform mapping p to a(b(p))."""
    return a.compose(b)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


def project(intr: CameraIntrinsics, p_cam):
    """Project camera-frame points to pixel coordinates.

    Args:
        intr: pinhole intrinsics.
        p_cam: (3,) point or (N, 3) batch in the camera frame, meters.

    Returns:
        (u, v, depth) scalars for a single point, or three (N,) arrays.
        (u, v) may lie outside the image bounds; the caller clips.

    Raises:
        BehindCamera: if any point has depth <= 0.
    """
    p = np.asarray(p_cam, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    z = p[:, 2]
    if np.any(z <= 0.0):
        raise BehindCamera("point(s) at non-positive depth")
    u = intr.fx * p[:, 0] / z + intr.cx
    v = intr.fy * p[:, 1] / z + intr.cy
    if single:
        return float(u[0]), float(v[0]), float(z[0])
    return u, v, z.copy()


def unproject(intr: CameraIntrinsics, u, v, depth):
    """Inverse of project: pixel coordinates + depth to camera-frame points.

    Raises:
        NonPositiveDepth: if any depth <= 0.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d <= 0.0):
        raise NonPositiveDepth("depth must be positive")
    x = (u - intr.cx) / intr.fx * d
    y = (v - intr.cy) / intr.fy * d
    out = np.stack(np.broadcast_arrays(x, y, d), axis=-1)
    return out if out.ndim > 1 else out.reshape(3)


def rotation_angle_deg(a: Rotation, b: Rotation) -> float:
    """Angle in degrees of the relative rotation between `a` and `b`, in [0, 180]."""
    rel = a.matrix().T @ b.matrix()
    # clamp absorbs floating-point drift at the 0 / 180 degree boundaries
    c = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))
