"""Close the color gap between two image pools with histogram matching.

Simulates a white-balance mismatch by pushing the same rendered scene
through two different color curves, then matches the "rendered" pool onto
the "photo" pool and reports per-channel Kolmogorov-Smirnov distances.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from scrforge import (PoseSamplerConfig, SplatConfig, compute_cdf, ks_distance,
                      match, render, sample_poses)
from scrforge.toyscene import default_intrinsics, make_box_room

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)


def warm_curve(img):
    """A per-channel monotone color curve standing in for a camera's AWB."""
    x = img.astype(np.float64) / 255.0
    warped = np.stack([x[..., 0] ** 0.7, x[..., 1] ** 1.0, x[..., 2] ** 1.6],
                      axis=-1)
    return np.clip(warped * 255.0, 0, 255).astype(np.uint8)


room = make_box_room(n_points=200_000, seed=0)
intr = default_intrinsics()
sampler = PoseSamplerConfig.for_cloud(room, seed=3)
frames = [render(room, p, intr, SplatConfig()) for p in sample_poses(sampler, 4)]

rendered_pool = [f.rgb for f in frames]
masks = [f.mask for f in frames]
photo_pool = [warm_curve(f.rgb) for f in frames]

# holes are excluded from both pools' CDFs via the validity masks
source_cdf = compute_cdf(rendered_pool, masks)
target_cdf = compute_cdf(photo_pool, masks)

print("per-channel KS distance to the photo pool:")
before = ks_distance(source_cdf, target_cdf)
print(f"  before matching: {np.round(before, 3)}")

matched = [match(img, source_cdf, target_cdf, m)
           for img, m in zip(rendered_pool, masks)]
after = ks_distance(compute_cdf(matched, masks), target_cdf)
print(f"  after matching:  {np.round(after, 3)}")

fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
for ax, img, title in zip(axes,
                          [rendered_pool[0], photo_pool[0], matched[0]],
                          ["rendered", "photo domain", "rendered, matched"]):
    ax.imshow(img)
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "histogram_matching.png", dpi=110)
print(f"wrote {out_dir / 'histogram_matching.png'}")
