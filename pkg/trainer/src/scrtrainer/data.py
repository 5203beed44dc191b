"""Dataset access: image/label loading, random crops, stride-8 label grids."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import EmptyManifest
from .formats import Frame, load_rgb, read_manifest, read_scm

STRIDE = 8


def to_unit_range(image: np.ndarray) -> torch.Tensor:
    """(H, W, 3) uint8 -> (3, H, W) float32 in [-1, 1]."""
    t = torch.from_numpy(np.array(image, copy=True)).float()
    return t.permute(2, 0, 1) / 127.5 - 1.0


def from_unit_range(t: torch.Tensor) -> np.ndarray:
    """(3, H, W) in [-1, 1] -> (H, W, 3) uint8."""
    arr = ((t.detach().clamp(-1, 1) + 1.0) * 127.5).round().byte()
    return arr.permute(1, 2, 0).cpu().numpy()


def label_grid(scmap: np.ndarray, mask: np.ndarray, origin_x: int = 0,
               origin_y: int = 0, width: int | None = None,
               height: int | None = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Nearest-center downsampling of a full-resolution label map.

    Grid cell (i, j) of the crop starting at (origin_x, origin_y) reads the
    full-resolution pixel (origin_x + 8i + 4, origin_y + 8j + 4).

    Returns:
        (labels (3, h/8, w/8) float32 meters, cell mask (h/8, w/8) uint8)
    """
    h_img, w_img = mask.shape
    width = w_img if width is None else width
    height = h_img if height is None else height
    xs = origin_x + np.arange(STRIDE // 2, width, STRIDE)
    ys = origin_y + np.arange(STRIDE // 2, height, STRIDE)
    grid = scmap[np.ix_(ys, xs)]
    cell_mask = mask[np.ix_(ys, xs)]
    labels = torch.from_numpy(np.ascontiguousarray(grid)).float().permute(2, 0, 1)
    return labels, torch.from_numpy(np.ascontiguousarray(cell_mask))


class FramePool:
    """Manifest-backed frame collection with whole-image caching."""

    def __init__(self, manifest_path, require_labels: bool):
        self.base = Path(manifest_path).parent
        self.frames: list[Frame] = [
            f for f in read_manifest(manifest_path)
            if not require_labels or f.scmap_path is not None]
        if not self.frames:
            raise EmptyManifest(f"{manifest_path}: no usable frames")
        self._images: dict[int, np.ndarray] = {}
        self._labels: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.frames)

    def image(self, index: int) -> np.ndarray:
        if index not in self._images:
            self._images[index] = load_rgb(self.frames[index].rgb_path)
        return self._images[index]

    def label(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        if index not in self._labels:
            self._labels[index] = read_scm(self.frames[index].scmap_path)
        return self._labels[index]


@dataclass
class ScrBatch:
    images: torch.Tensor  # (B, 3, c, c) in [-1, 1]
    labels: torch.Tensor  # (B, 3, c/8, c/8) meters
    masks: torch.Tensor   # (B, c/8, c/8) uint8


def sample_scr_batch(pool: FramePool, rng: np.random.Generator,
                     batch_size: int, crop: int) -> ScrBatch:
    """Random frames, random crops; the only augmentation is the crop."""
    images, labels, masks = [], [], []
    for _ in range(batch_size):
        idx = int(rng.integers(len(pool)))
        img = pool.image(idx)
        scmap, mask = pool.label(idx)
        h, w = mask.shape
        if crop > w or crop > h:
            raise ValueError(f"crop {crop} exceeds image size {w}x{h}")
        ox = int(rng.integers(w - crop + 1))
        oy = int(rng.integers(h - crop + 1))
        images.append(to_unit_range(img[oy:oy + crop, ox:ox + crop]))
        lab, m = label_grid(scmap, mask, ox, oy, crop, crop)
        labels.append(lab)
        masks.append(m)
    return ScrBatch(torch.stack(images), torch.stack(labels), torch.stack(masks))


def sample_image_batch(pool: FramePool, rng: np.random.Generator,
                       batch_size: int, crop: int) -> torch.Tensor:
    """Random image crops without labels (translation-network training)."""
    out = []
    for _ in range(batch_size):
        idx = int(rng.integers(len(pool)))
        img = pool.image(idx)
        h, w = img.shape[:2]
        if crop > w or crop > h:
            raise ValueError(f"crop {crop} exceeds image size {w}x{h}")
        ox = int(rng.integers(w - crop + 1))
        oy = int(rng.integers(h - crop + 1))
        out.append(to_unit_range(img[oy:oy + crop, ox:ox + crop]))
    return torch.stack(out)
