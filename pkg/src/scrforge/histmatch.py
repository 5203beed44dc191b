"""Per-channel histogram matching between a rendered-image pool and a photo pool."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyPool


@dataclass(frozen=True)
class ChannelCDF:
    """Empirical cumulative color distribution: 3 channels x 256 bins in [0, 1]."""

    values: np.ndarray  # (3, 256) float64, monotone, last bin exactly 1

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).reshape(3, 256).copy()
        if np.any(np.diff(v, axis=1) < 0):
            raise ValueError("CDF must be monotone non-decreasing")
        if not np.allclose(v[:, -1], 1.0):
            raise ValueError("CDF must end at 1")
        v[:, -1] = 1.0
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def to_json(self) -> str:
        return json.dumps({"cdf": self.values.reshape(-1).tolist()})

    @staticmethod
    def from_json(text: str) -> "ChannelCDF":
        data = json.loads(text)
        return ChannelCDF(np.asarray(data["cdf"], dtype=np.float64).reshape(3, 256))


def compute_cdf(images: Sequence[np.ndarray],
                masks: Optional[Sequence[Optional[np.ndarray]]] = None) -> ChannelCDF:
    """Empirical per-channel CDF pooled over all (valid) pixels of all images.

    Args:
        images: RGB uint8 arrays of shape (H, W, 3); sizes may differ.
        masks: optional per-image validity masks (H, W); nonzero = counted.
            A None entry counts every pixel of that image.

    Raises:
        EmptyPool: no image contributes any counted pixel.
    """
    if masks is not None and len(masks) != len(images):
        raise ValueError("masks must pair one-to-one with images")
    counts = np.zeros((3, 256), dtype=np.int64)
    for i, img in enumerate(images):
        img = np.asarray(img)
        if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
            raise ValueError("images must be (H, W, 3) uint8")
        mask = None if masks is None else masks[i]
        pixels = img.reshape(-1, 3) if mask is None else img[np.asarray(mask) != 0]
        for ch in range(3):
            counts[ch] += np.bincount(pixels[:, ch], minlength=256)
    total = counts.sum(axis=1)
    if np.any(total == 0):
        raise EmptyPool("no counted pixels in image pool")
    cdf = np.cumsum(counts, axis=1) / total[:, None]
    cdf[:, -1] = 1.0
    return ChannelCDF(cdf)


def matching_lut(source_cdf: ChannelCDF, target_cdf: ChannelCDF) -> np.ndarray:
    """Per-channel intensity lookup table implementing the matching rule:
    intensity i maps to the smallest j with target_cdf[j] >= source_cdf[i]."""
    lut = np.empty((3, 256), dtype=np.uint8)
    for ch in range(3):
        j = np.searchsorted(target_cdf.values[ch], source_cdf.values[ch], side="left")
        lut[ch] = np.minimum(j, 255).astype(np.uint8)
    return lut


def match(image: np.ndarray,
          source_cdf: ChannelCDF,
          target_cdf: ChannelCDF,
          mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Remap `image` intensities so the source pool's CDF lands on the target's.

    Invalid pixels (mask == 0) pass through unchanged.
    """
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("image must be (H, W, 3) uint8")
    lut = matching_lut(source_cdf, target_cdf)
    out = np.stack([lut[ch][img[..., ch]] for ch in range(3)], axis=-1)
    if mask is not None:
        invalid = np.asarray(mask) == 0
        out[invalid] = img[invalid]
    return out


def ks_distance(a: ChannelCDF, b: ChannelCDF) -> np.ndarray:
    """Per-channel Kolmogorov-Smirnov distance between two CDFs, shape (3,)."""
    return np.abs(a.values - b.values).max(axis=1)
