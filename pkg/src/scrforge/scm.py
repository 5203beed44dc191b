"""SCM1 binary format for scene-coordinate maps.

Layout: magic b"SCM1"; little-endian u32 width, height, channels (= 3);
width*height*3 little-endian float32 values, row-major, channel-interleaved
(X, Y, Z per pixel, meters); then width*height validity bytes (1 valid,
0 invalid). This file format is the contract between the renderer / solver
and the external trainer component.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

MAGIC = b"SCM1"


def write_scm(path, scmap: np.ndarray, mask: np.ndarray) -> None:
    scmap = np.ascontiguousarray(scmap, dtype="<f4")
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    if scmap.ndim != 3 or scmap.shape[2] != 3:
        raise ValueError("scmap must be (H, W, 3)")
    if mask.shape != scmap.shape[:2]:
        raise ValueError("mask shape must match scmap")
    h, w = mask.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", w, h, 3))
        fh.write(scmap.tobytes())
        fh.write((mask != 0).astype(np.uint8).tobytes())


def read_scm(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an SCM1 file; returns (scmap (H, W, 3) float32, mask (H, W) uint8).

    Raises:
        ParseError: bad magic, header, or truncated payload.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ParseError(f"{path}: not an SCM1 file")
    w, h, ch = struct.unpack("<III", raw[4:16])
    if ch != 3:
        raise ParseError(f"{path}: expected 3 channels, found {ch}")
    need = 16 + w * h * 3 * 4 + w * h
    if len(raw) < need:
        raise ParseError(f"{path}: truncated ({len(raw)} bytes, need {need})")
    scmap = np.frombuffer(raw[16:16 + w * h * 12], dtype="<f4").reshape(h, w, 3)
    mask = np.frombuffer(raw[16 + w * h * 12:need], dtype=np.uint8).reshape(h, w)
    return scmap.copy(), mask.copy()
