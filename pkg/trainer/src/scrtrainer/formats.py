"""Readers/writers for the data contracts shared with the rendering toolkit.

These are independent implementations of the documented external formats:
JSONL dataset manifests and the SCM1 scene-coordinate container. Nothing
here imports the rendering package; files are the interface.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import FormatError

SCM_MAGIC = b"SCM1"


def read_scm(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an SCM1 file: (scmap (H, W, 3) float32, mask (H, W) uint8)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != SCM_MAGIC:
        raise FormatError(f"{path}: not an SCM1 file")
    w, h, ch = struct.unpack("<III", raw[4:16])
    if ch != 3:
        raise FormatError(f"{path}: expected 3 channels, found {ch}")
    need = 16 + w * h * 12 + w * h
    if len(raw) < need:
        raise FormatError(f"{path}: truncated")
    scmap = np.frombuffer(raw[16:16 + w * h * 12], dtype="<f4").reshape(h, w, 3)
    mask = np.frombuffer(raw[16 + w * h * 12:need], dtype=np.uint8).reshape(h, w)
    return scmap.copy(), mask.copy()


def write_scm(path, scmap: np.ndarray, mask: np.ndarray) -> None:
    scmap = np.ascontiguousarray(scmap, dtype="<f4")
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    h, w = mask.shape
    if scmap.shape != (h, w, 3):
        raise FormatError("scmap must be (H, W, 3) matching the mask")
    with open(path, "wb") as fh:
        fh.write(SCM_MAGIC)
        fh.write(struct.pack("<III", w, h, 3))
        fh.write(scmap.tobytes())
        fh.write((mask != 0).astype(np.uint8).tobytes())


@dataclass(frozen=True)
class Frame:
    """One manifest record; paths already resolved against the manifest dir."""

    frame_id: str
    rgb_path: Path
    scmap_path: Optional[Path]
    pose: Optional[dict]        # {"q": [w,x,y,z], "t": [x,y,z]} or None
    intrinsics: dict            # {"fx","fy","cx","cy","width","height"}


def read_manifest(path) -> list[Frame]:
    path = Path(path)
    base = path.parent
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                frames.append(Frame(
                    frame_id=str(data["id"]),
                    rgb_path=base / data["rgb"],
                    scmap_path=None if data.get("scmap") is None
                    else base / data["scmap"],
                    pose=data.get("pose"),
                    intrinsics=data["intrinsics"],
                ))
            except (json.JSONDecodeError, KeyError) as exc:
                raise FormatError(f"{path}:{lineno}: bad record ({exc})") from exc
    return frames


def write_manifest(path, frames: list[Frame]) -> None:
    """Write records with paths stored relative to the manifest directory."""
    path = Path(path)
    base = path.parent
    with open(path, "w") as fh:
        for fr in frames:
            rec = {
                "id": fr.frame_id,
                "rgb": os.path.relpath(fr.rgb_path, base),
                "scmap": None if fr.scmap_path is None
                else os.path.relpath(fr.scmap_path, base),
                "pose": fr.pose,
                "intrinsics": fr.intrinsics,
            }
            fh.write(json.dumps(rec) + "\n")


def load_rgb(path) -> np.ndarray:
    """Load an image as (H, W, 3) uint8."""
    return np.asarray(Image.open(path).convert("RGB"))


def save_rgb(path, image: np.ndarray) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)
