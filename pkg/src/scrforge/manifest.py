"""JSONL dataset manifests: one frame record per line.

Record schema:
    {"id": str, "rgb": relpath, "scmap": relpath | null,
     "pose": {"q": [w, x, y, z], "t": [tx, ty, tz]} | null,
     "intrinsics": {"fx", "fy", "cx", "cy", "width", "height"}}

Poses are world-to-camera; a null pose marks an unlabeled target photo.
Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ManifestError
from .geometry import CameraIntrinsics, RigidTransform, Rotation


def pose_to_json(pose: RigidTransform) -> dict:
    return {"q": [float(x) for x in pose.rotation.quat],
            "t": [float(x) for x in pose.translation]}


def pose_from_json(data: dict) -> RigidTransform:
    q = np.asarray(data["q"], dtype=np.float64)
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise ManifestError(f"quaternion not normalized: {q.tolist()}")
    return RigidTransform(Rotation(q), np.asarray(data["t"], dtype=np.float64))


def intrinsics_to_json(intr: CameraIntrinsics) -> dict:
    return {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
            "width": intr.width, "height": intr.height}


def intrinsics_from_json(data: dict) -> CameraIntrinsics:
    try:
        return CameraIntrinsics(
            fx=float(data["fx"]), fy=float(data["fy"]),
            cx=float(data["cx"]), cy=float(data["cy"]),
            width=int(data["width"]), height=int(data["height"]))
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"bad intrinsics: {exc}") from exc


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    rgb: str                       # path relative to the manifest
    intrinsics: CameraIntrinsics
    scmap: Optional[str] = None    # null for unlabeled target photos
    pose: Optional[RigidTransform] = None

    def to_json(self) -> dict:
        return {
            "id": self.frame_id,
            "rgb": self.rgb,
            "scmap": self.scmap,
            "pose": None if self.pose is None else pose_to_json(self.pose),
            "intrinsics": intrinsics_to_json(self.intrinsics),
        }


def _record_from_json(data: dict) -> FrameRecord:
    try:
        return FrameRecord(
            frame_id=str(data["id"]),
            rgb=data["rgb"],
            scmap=data.get("scmap"),
            pose=None if data.get("pose") is None else pose_from_json(data["pose"]),
            intrinsics=intrinsics_from_json(data["intrinsics"]),
        )
    except KeyError as exc:
        raise ManifestError(f"manifest record missing {exc}") from exc


def write_manifest(path, records: list[FrameRecord]) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def read_manifest(path, check_files: bool = True) -> list[FrameRecord]:
    """Load all records; with check_files, verify referenced files exist.

    Raises:
        ManifestError: malformed record or missing referenced file.
    """
    path = Path(path)
    base = path.parent
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON") from exc
            rec = _record_from_json(data)
            if check_files:
                for ref in (rec.rgb, rec.scmap):
                    if ref is not None and not (base / ref).exists():
                        raise ManifestError(f"{path}:{lineno}: missing file {ref}")
            records.append(rec)
    return records
