"""6DoF pose from 2D-3D correspondences: P3P minimal solver, RANSAC, refinement.

The minimal solver reduces the three-ray length system to a quartic
polynomial (Grunert's parameterization), extracts real roots with a
companion-matrix eigen-solver, polishes them with Newton steps, and recovers
each rigid transform by aligning the world triangle to the reconstructed
camera-frame triangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGeometry, NoRealSolution, TooFewCorrespondences
from .geometry import CameraIntrinsics, RigidTransform, Rotation
from .registration import umeyama_rigid

P3P_REPROJECTION_TOL_PX = 1e-6
MIN_TRIANGLE_AREA_M2 = 1e-9


@dataclass(frozen=True)
class Correspondence:
    """A pixel observation (u, v) of a world point (X, Y, Z)."""

    pixel: tuple[float, float]
    world: tuple[float, float, float]

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.pixel)) and np.all(np.isfinite(self.world))):
            raise ValueError("correspondence components must be finite")


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold_px: float = 10.0
    confidence: float = 0.99
    max_iterations: int = 1000
    min_inliers: int = 12
    refine_iterations: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if self.inlier_threshold_px <= 0:
            raise ValueError("inlier threshold must be positive")


@dataclass(frozen=True)
class PoseEstimate:
    """PnP-RANSAC output. `pose` is the best hypothesis even when invalid."""

    pose: RigidTransform
    inlier_count: int
    inlier_mask: np.ndarray  # (N,) bool
    reprojection_rms_px: float
    valid: bool


def _to_arrays(corrs: Sequence[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    pixels = np.array([c.pixel for c in corrs], dtype=np.float64).reshape(-1, 2)
    world = np.array([c.world for c in corrs], dtype=np.float64).reshape(-1, 3)
    return pixels, world


def _bearing_vectors(intr: CameraIntrinsics, pixels: np.ndarray) -> np.ndarray:
    rays = np.column_stack([
        (pixels[:, 0] - intr.cx) / intr.fx,
        (pixels[:, 1] - intr.cy) / intr.fy,
        np.ones(len(pixels)),
    ])
    return rays / np.linalg.norm(rays, axis=1, keepdims=True)


def _reprojection_errors(pose: RigidTransform, world: np.ndarray,
                         pixels: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Pixel distance between observations and projections; inf behind the camera."""
    cam = pose.apply(world)
    z = cam[:, 2]
    err = np.full(len(world), np.inf)
    front = z > 1e-12
    u = intr.fx * cam[front, 0] / z[front] + intr.cx
    v = intr.fy * cam[front, 1] / z[front] + intr.cy
    err[front] = np.hypot(u - pixels[front, 0], v - pixels[front, 1])
    return err


def p3p_solve(corrs: Sequence[Correspondence],
              intr: CameraIntrinsics) -> list[RigidTransform]:
    """Solve the perspective-three-point problem.

    Args:
        corrs: exactly 3 correspondences with non-collinear world points and
            distinct pixels.

    Returns:
        Up to 4 world-to-camera poses, each reprojecting all three points
        within 1e-6 px.

    Raises:
        DegenerateGeometry: collinear world points or duplicate pixels.
        NoRealSolution: no admissible real root of the quartic.
    """
    if len(corrs) != 3:
        raise ValueError("p3p_solve needs exactly 3 correspondences")
    pixels, world = _to_arrays(corrs)

    area = 0.5 * np.linalg.norm(np.cross(world[1] - world[0], world[2] - world[0]))
    if area <= MIN_TRIANGLE_AREA_M2:
        raise DegenerateGeometry(f"world triangle area {area:.3e} m^2")
    for i in range(3):
        for j in range(i + 1, 3):
            if np.allclose(pixels[i], pixels[j]):
                raise DegenerateGeometry("duplicate pixels in minimal set")

    rays = _bearing_vectors(intr, pixels)
    f1, f2, f3 = rays
    p1, p2, p3 = world

    a = np.linalg.norm(p2 - p3)
    b = np.linalg.norm(p1 - p3)
    c = np.linalg.norm(p1 - p2)
    cos_a = float(f2 @ f3)
    cos_b = float(f1 @ f3)
    cos_c = float(f1 @ f2)

    a2, b2, c2 = a * a, b * b, c * c
    q = (a2 - c2) / b2
    r = (a2 + c2) / b2

    coeffs = np.array([
        (q - 1.0) ** 2 - 4.0 * (c2 / b2) * cos_a ** 2,
        4.0 * (q * (1.0 - q) * cos_b
               - (1.0 - r) * cos_a * cos_c
               + 2.0 * (c2 / b2) * cos_a ** 2 * cos_b),
        2.0 * (q * q - 1.0
               + 2.0 * q * q * cos_b ** 2
               + 2.0 * ((b2 - c2) / b2) * cos_a ** 2
               - 4.0 * r * cos_a * cos_b * cos_c
               + 2.0 * ((b2 - a2) / b2) * cos_c ** 2),
        4.0 * (-q * (1.0 + q) * cos_b
               + 2.0 * (a2 / b2) * cos_c ** 2 * cos_b
               - (1.0 - r) * cos_a * cos_c),
        (1.0 + q) ** 2 - 4.0 * (a2 / b2) * cos_c ** 2,
    ])
    if not np.all(np.isfinite(coeffs)) or np.allclose(coeffs, 0.0):
        raise DegenerateGeometry("quartic coefficients degenerate")

    roots = np.roots(coeffs)  # companion-matrix eigenvalues
    deriv = np.polyder(coeffs)
    solutions: list[RigidTransform] = []
    for root in roots:
        if abs(root.imag) > 1e-6 * max(1.0, abs(root.real)):
            continue
        v = float(root.real)
        for _ in range(3):  # Newton polish recovers accuracy near close roots
            dp = np.polyval(deriv, v)
            if dp == 0.0:
                break
            v -= np.polyval(coeffs, v) / dp

        denom = 1.0 + v * v - 2.0 * v * cos_b
        if denom <= 0.0:
            continue
        s1 = float(np.sqrt(b2 / denom))
        u_den = 2.0 * (cos_c - v * cos_a)
        if abs(u_den) < 1e-14:
            continue
        u = ((-1.0 + q) * v * v - 2.0 * q * cos_b * v + 1.0 + q) / u_den
        s2 = u * s1
        s3 = v * s1
        if s1 <= 0.0 or s2 <= 0.0 or s3 <= 0.0:
            continue

        cam_pts = np.array([s1 * f1, s2 * f2, s3 * f3])
        pose = umeyama_rigid(world, cam_pts)
        err = _reprojection_errors(pose, world, pixels, intr)
        if np.all(err < P3P_REPROJECTION_TOL_PX):
            solutions.append(pose)

    if not solutions:
        raise NoRealSolution("no admissible P3P solution")
    return solutions


def _rodrigues(omega: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        return np.eye(3) + _skew(omega)
    k = omega / theta
    ks = _skew(k)
    return np.eye(3) + np.sin(theta) * ks + (1.0 - np.cos(theta)) * (ks @ ks)


def _skew(w: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def refine_pose(pose: RigidTransform,
                world: np.ndarray,
                pixels: np.ndarray,
                intr: CameraIntrinsics,
                iterations: int = 20) -> RigidTransform:
    """Gauss-Newton on reprojection error over a 6-DoF rotation-vector +
    translation parameterization, with step halving so the RMS never increases.
    """
    rmat = pose.rotation.matrix()
    t = pose.translation.copy()

    def rms_of(rm, tv):
        cam = world @ rm.T + tv
        z = np.maximum(cam[:, 2], 1e-12)
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
        res = np.column_stack([u - pixels[:, 0], v - pixels[:, 1]])
        return float(np.sqrt(np.mean(res ** 2) * 2.0)), res, cam

    best_rms, res, cam = rms_of(rmat, t)
    for _ in range(iterations):
        z = np.maximum(cam[:, 2], 1e-12)
        inv_z = 1.0 / z
        x, y = cam[:, 0], cam[:, 1]
        # d(u,v)/d(p_cam), stacked over points
        duv_dp = np.zeros((len(world), 2, 3))
        duv_dp[:, 0, 0] = intr.fx * inv_z
        duv_dp[:, 0, 2] = -intr.fx * x * inv_z ** 2
        duv_dp[:, 1, 1] = intr.fy * inv_z
        duv_dp[:, 1, 2] = -intr.fy * y * inv_z ** 2
        # p_cam = exp([w]) R p + t: dp/dw = -[p_cam - t]x, dp/dt = I
        rp = cam - t
        dp_dw = np.zeros((len(world), 3, 3))
        dp_dw[:, 0, 1] = rp[:, 2]
        dp_dw[:, 0, 2] = -rp[:, 1]
        dp_dw[:, 1, 0] = -rp[:, 2]
        dp_dw[:, 1, 2] = rp[:, 0]
        dp_dw[:, 2, 0] = rp[:, 1]
        dp_dw[:, 2, 1] = -rp[:, 0]
        jac = np.concatenate([
            np.einsum("nij,njk->nik", duv_dp, dp_dw),
            duv_dp,
        ], axis=2).reshape(-1, 6)
        rhs = -res.reshape(-1)

        jtj = jac.T @ jac
        jtr = jac.T @ rhs
        try:
            step = np.linalg.solve(jtj + 1e-12 * np.eye(6), jtr)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break

        improved = False
        scale = 1.0
        for _ in range(8):  # halve the step until the RMS does not increase
            r_try = _rodrigues(scale * step[:3]) @ rmat
            t_try = t + scale * step[3:]
            rms_try, res_try, cam_try = rms_of(r_try, t_try)
            if rms_try <= best_rms:
                rmat, t = r_try, t_try
                best_rms, res, cam = rms_try, res_try, cam_try
                improved = True
                break
            scale *= 0.5
        if not improved or np.linalg.norm(step) < 1e-14:
            break

    return RigidTransform(Rotation.from_matrix(rmat), t)


def pnp_ransac(corrs: Sequence[Correspondence],
               intr: CameraIntrinsics,
               cfg: RansacConfig = RansacConfig()) -> PoseEstimate:
    """Robust pose from correspondences via P3P hypotheses and RANSAC.

    Each iteration samples 4 correspondences, solves P3P on three, picks the
    hypothesis the fourth agrees with best, and scores inliers under the
    pixel threshold. The iteration budget adapts as
    N = log(1 - confidence) / log(1 - w^4) for the best inlier ratio w,
    capped at cfg.max_iterations. The best hypothesis is polished by
    Gauss-Newton on its inliers, re-classifying and re-refining twice.

    Raises:
        TooFewCorrespondences: fewer than 4 correspondences.
    """
    if len(corrs) < 4:
        raise TooFewCorrespondences(f"need >= 4, got {len(corrs)}")
    pixels, world = _to_arrays(corrs)
    n = len(corrs)
    rng = np.random.default_rng(cfg.seed)

    best_pose: Optional[RigidTransform] = None
    best_count = 0
    best_rms = np.inf
    max_needed = cfg.max_iterations

    iteration = 0
    while iteration < min(max_needed, cfg.max_iterations):
        iteration += 1
        pick = rng.choice(n, size=4, replace=False)
        try:
            hyps = p3p_solve([corrs[i] for i in pick[:3]], intr)
        except (DegenerateGeometry, NoRealSolution):
            continue

        # disambiguate with the 4th point, then score the chosen hypothesis
        probe_w = world[pick[3]:pick[3] + 1]
        probe_px = pixels[pick[3]:pick[3] + 1]
        fourth = [_reprojection_errors(h, probe_w, probe_px, intr)[0] for h in hyps]
        hyp = hyps[int(np.argmin(fourth))]

        err = _reprojection_errors(hyp, world, pixels, intr)
        mask = err < cfg.inlier_threshold_px
        count = int(mask.sum())
        if count == 0:
            continue
        rms = float(np.sqrt(np.mean(err[mask] ** 2)))
        if count > best_count or (count == best_count and rms < best_rms):
            best_pose, best_count, best_rms = hyp, count, rms
            w = count / n
            if w >= 1.0:
                max_needed = iteration
            else:
                denom = np.log1p(-min(w ** 4, 1.0 - 1e-12))
                max_needed = int(np.ceil(np.log(1.0 - cfg.confidence) / denom))

    if best_pose is None:
        return PoseEstimate(RigidTransform.identity(), 0,
                            np.zeros(n, dtype=bool), np.inf, False)

    pose = best_pose
    mask = _reprojection_errors(pose, world, pixels, intr) < cfg.inlier_threshold_px
    for _ in range(3):  # refine, re-classify, re-refine twice
        if mask.sum() >= 3:
            pose = refine_pose(pose, world[mask], pixels[mask], intr,
                               cfg.refine_iterations)
        mask = _reprojection_errors(pose, world, pixels, intr) < cfg.inlier_threshold_px

    err = _reprojection_errors(pose, world, pixels, intr)
    mask = err < cfg.inlier_threshold_px
    count = int(mask.sum())
    rms = float(np.sqrt(np.mean(err[mask] ** 2))) if count else np.inf
    return PoseEstimate(pose, count, mask, rms, count >= cfg.min_inliers)


def sample_correspondences(scmap: np.ndarray,
                           mask: np.ndarray,
                           stride: int = 8,
                           grid: bool = False) -> list[Correspondence]:
    """Sample one correspondence per valid stride cell of a scene-coordinate map.

    Args:
        scmap: (H, W, 3) world coordinates. Either a full-resolution map
            (grid=False) sampled every `stride` pixels, or a map already on
            the stride grid (grid=True), one entry per cell.
        mask: (H, W) validity; cells with mask 0 are skipped.
        stride: cell size in image pixels; the emitted pixel coordinate of
            cell (i, j) is (stride*i + stride/2, stride*j + stride/2).
        grid: whether `scmap` rows/cols index cells rather than pixels.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    scmap = np.asarray(scmap)
    mask = np.asarray(mask)
    h, w = mask.shape

    if grid:
        jj, ii = np.nonzero(mask != 0)
        coords = scmap[jj, ii]
    else:
        sample_u = np.arange(stride // 2, w, stride)
        sample_v = np.arange(stride // 2, h, stride)
        vv, uu = np.meshgrid(sample_v, sample_u, indexing="ij")
        valid = mask[vv, uu] != 0
        coords = scmap[vv[valid], uu[valid]]
        jj = vv[valid] // stride
        ii = uu[valid] // stride

    half = stride / 2.0
    return [
        Correspondence((float(stride * i + half), float(stride * j + half)),
                       (float(p[0]), float(p[1]), float(p[2])))
        for i, j, p in zip(ii, jj, coords)
    ]
