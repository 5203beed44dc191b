"""Pose-error metrics and aggregate reports (median / 95th percentile / mean)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyList
from .geometry import RigidTransform, rotation_angle_deg
from .pnp import PoseEstimate

PERCENTILE_POLICIES = ("exclude", "penalize")


@dataclass(frozen=True)
class PoseError:
    rotation_deg: float
    translation_m: float  # camera-center distance
    valid: bool = True


def pose_error(gt: RigidTransform, est) -> PoseError:
    """Rotation angle and camera-center distance between ground truth and
    an estimate (a PoseEstimate or a bare RigidTransform).

    Invalid estimates yield PoseError(valid=False); aggregation decides how
    they count.
    """
    if isinstance(est, PoseEstimate):
        if not est.valid:
            return PoseError(np.nan, np.nan, valid=False)
        est = est.pose
    rot = rotation_angle_deg(gt.rotation, est.rotation)
    trans = float(np.linalg.norm(gt.camera_center() - est.camera_center()))
    return PoseError(rot, trans, valid=True)


def _linear_percentile(sorted_values: np.ndarray, p: float) -> float:
    """Percentile by linear interpolation between order statistics."""
    n = len(sorted_values)
    if n == 1:
        return float(sorted_values[0])
    rank = (n - 1) * (p / 100.0)
    lo = int(np.floor(rank))
    hi = min(lo + 1, n - 1)
    frac = rank - lo
    return float(sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac)


@dataclass(frozen=True)
class MetricStats:
    median: float
    p95: float
    mean: float


@dataclass(frozen=True)
class EvalReport:
    rotation_deg: MetricStats
    translation_m: MetricStats
    invalid_fraction: float
    frame_count: int

    def to_json(self) -> dict:
        def stats(s: MetricStats) -> dict:
            return {"median": s.median, "p95": s.p95, "mean": s.mean}
        return {
            "rotation_deg": stats(self.rotation_deg),
            "translation_m": stats(self.translation_m),
            "invalid_fraction": self.invalid_fraction,
            "frame_count": self.frame_count,
        }

    @staticmethod
    def from_json(data: dict) -> "EvalReport":
        def stats(d: dict) -> MetricStats:
            return MetricStats(d["median"], d["p95"], d["mean"])
        return EvalReport(stats(data["rotation_deg"]), stats(data["translation_m"]),
                          data["invalid_fraction"], data["frame_count"])


def aggregate(errors: Sequence[PoseError], percentile_policy: str = "exclude"
              ) -> EvalReport:
    """Summarize pose errors.

    Policy "exclude": percentiles over valid entries only; invalid frames
    show up solely in invalid_fraction. Policy "penalize": invalid entries
    enter the percentiles as +inf, saturating the tail.

    Raises:
        EmptyList: on an empty error list.
    """
    if len(errors) == 0:
        raise EmptyList("no pose errors to aggregate")
    if percentile_policy not in PERCENTILE_POLICIES:
        raise ValueError(f"unknown policy {percentile_policy!r}")

    invalid = sum(1 for e in errors if not e.valid)

    def column(selector) -> np.ndarray:
        vals = [selector(e) for e in errors if e.valid]
        if percentile_policy == "penalize":
            vals += [np.inf] * invalid
        return np.sort(np.asarray(vals, dtype=np.float64))

    def stats(selector) -> MetricStats:
        vals = column(selector)
        if len(vals) == 0:
            return MetricStats(np.nan, np.nan, np.nan)
        return MetricStats(_linear_percentile(vals, 50.0),
                           _linear_percentile(vals, 95.0),
                           float(np.mean(vals)))

    return EvalReport(
        rotation_deg=stats(lambda e: e.rotation_deg),
        translation_m=stats(lambda e: e.translation_m),
        invalid_fraction=invalid / len(errors),
        frame_count=len(errors),
    )


def markdown_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned markdown comparison table: method, median error, 95%-tile error."""
    header = [("Method", "Median error", "95%-tile error", "Invalid")]
    body = []
    for name, rep in rows:
        body.append((
            name,
            f"{rep.rotation_deg.median:.2f} deg, {rep.translation_m.median:.3f} m",
            f"{rep.rotation_deg.p95:.2f} deg, {rep.translation_m.p95:.3f} m",
            f"{100.0 * rep.invalid_fraction:.1f}%",
        ))
    widths = [max(len(r[i]) for r in header + body) for i in range(4)]
    lines = []
    for i, row in enumerate(header + body):
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        if i == 0:
            lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    return "\n".join(lines) + "\n"


def write_report(path, report: EvalReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")


def read_report(path) -> EvalReport:
    with open(path) as fh:
        return EvalReport.from_json(json.load(fh))
