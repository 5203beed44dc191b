"""Rigid alignment: closed-form least squares on point pairs, and point-to-point ICP."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateConfiguration, NoCorrespondences, TooFewPoints
from .geometry import RigidTransform, Rotation
from .pointcloud import ColorPointCloud, SpatialIndex


def umeyama_rigid(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform T minimizing sum ||dst_i - T(src_i)||^2.

    Cross-covariance SVD with determinant-sign correction, no scale.

    Args:
        src, dst: (N, 3) corresponding points, N >= 3.

    Raises:
        TooFewPoints: fewer than 3 pairs.
        DegenerateConfiguration: centered src has rank < 2 (collinear points).
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if len(src) != len(dst):
        raise ValueError("src and dst must pair one-to-one")
    if len(src) < 3:
        raise TooFewPoints(f"need >= 3 pairs, got {len(src)}")

    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    src_c = src - mu_s
    dst_c = dst - mu_d

    cov = dst_c.T @ src_c / len(src)
    scale = float(np.abs(src_c).max())
    if scale == 0.0 or np.linalg.matrix_rank(src_c / scale, tol=1e-9) < 2:
        raise DegenerateConfiguration("centered source points have rank < 2")

    u, s, vt = np.linalg.svd(cov)
    d = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        d[2, 2] = -1.0
    r = u @ d @ vt
    t = mu_d - r @ mu_s
    return RigidTransform(Rotation.from_matrix(r), t)


@dataclass(frozen=True)
class IcpConfig:
    max_iterations: int = 50
    convergence_rms_m: float = 1e-6   # stop when RMS or its change drops below this
    max_correspondence_m: float = 0.5
    seed: int = 0
    max_points: Optional[int] = None  # subsample src for speed; None = use all

    def __post_init__(self) -> None:
        if self.convergence_rms_m <= 0 or self.max_correspondence_m <= 0:
            raise ValueError("thresholds must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rms_m: float
    iterations: int
    rms_history: tuple = field(default_factory=tuple)


def icp(src: ColorPointCloud,
        dst: ColorPointCloud,
        init: Optional[RigidTransform] = None,
        cfg: IcpConfig = IcpConfig(),
        dst_index: Optional[SpatialIndex] = None) -> IcpResult:
    """Point-to-point ICP aligning `src` onto `dst`.

    Alternates nearest-neighbor matching (rejecting pairs beyond
    max_correspondence_m) with the closed-form rigid solve, composing the
    per-iteration increments onto the running transform.

    Raises:
        NoCorrespondences: no pair within the distance bound at some iteration.
    """
    if len(src) == 0 or len(dst) == 0:
        raise NoCorrespondences("both clouds must be non-empty")
    transform = init if init is not None else RigidTransform.identity()
    index = dst_index if dst_index is not None else SpatialIndex(dst)

    src_pts = src.positions.astype(np.float64)
    if cfg.max_points is not None and len(src_pts) > cfg.max_points:
        rng = np.random.default_rng(cfg.seed)
        pick = rng.choice(len(src_pts), size=cfg.max_points, replace=False)
        src_pts = src_pts[np.sort(pick)]

    dst_pts = dst.positions.astype(np.float64)
    prev_rms = np.inf
    history = []
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        moved = transform.apply(src_pts)
        idx, dist = index.query_within(moved, cfg.max_correspondence_m)
        matched = idx >= 0
        if not np.any(matched):
            raise NoCorrespondences(
                f"no pair within {cfg.max_correspondence_m} m at iteration {iterations}")
        pairs_src = moved[matched]
        pairs_dst = dst_pts[idx[matched]]

        pre_rms = float(np.sqrt(np.mean(dist[matched] ** 2)))
        delta = umeyama_rigid(pairs_src, pairs_dst)
        transform = delta.compose(transform)

        residual = pairs_dst - delta.apply(pairs_src)
        rms = float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
        # the closed-form step can never be worse than the incoming matching
        assert rms <= pre_rms + 1e-12, "alignment step increased RMS"
        history.append(rms)

        if rms <= cfg.convergence_rms_m or abs(prev_rms - rms) <= cfg.convergence_rms_m:
            break
        prev_rms = rms

    return IcpResult(transform, history[-1], iterations, tuple(history))
