"""Inference: dense stride-8 scene-coordinate maps written as SCM1 files."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .data import STRIDE, to_unit_range
from .formats import write_scm


def predict_scmap(network, image: np.ndarray) -> np.ndarray:
    """Predict the stride-8 coordinate grid for one (H, W, 3) uint8 image.

    Inputs whose sides are not multiples of 8 are replicate-padded up, and
    the output is cropped to (H // 8, W // 8) so grid cell (i, j) always
    corresponds to pixel center (8i + 4, 8j + 4).

    Returns:
        (H // 8, W // 8, 3) float32 world coordinates.
    """
    h, w = image.shape[:2]
    x = to_unit_range(image)[None]
    pad_r = (-w) % STRIDE
    pad_b = (-h) % STRIDE
    if pad_r or pad_b:
        x = F.pad(x, (0, pad_r, 0, pad_b), mode="replicate")
    network.eval()
    with torch.no_grad():
        out = network(x)[0]
    grid = out.permute(1, 2, 0).numpy().astype(np.float32)
    return grid[:h // STRIDE, :w // STRIDE]


def predict_to_scm(network, image: np.ndarray, out_path) -> np.ndarray:
    """Predict and write an SCM1 file with an all-valid mask."""
    grid = predict_scmap(network, image)
    mask = np.ones(grid.shape[:2], dtype=np.uint8)
    write_scm(out_path, grid, mask)
    return grid
