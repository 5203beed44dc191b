"""Desk-scale training-strategy ladder on the synthetic domain-gap scene.

Four arms train the same regressor on differently prepared data and are
scored on the color-curved target test set:

    blind       rendered source images as-is
    histmatch   source images after pool-level histogram matching
    adapted     histogram-matched images translated by a trained CUT network
    supervised  target-domain images with their own labels (upper bound)

Pose solving and scoring go through the scrforge CLI (`solve`, `eval`);
predictions cross the boundary as SCM1 files.
"""

from __future__ import annotations

import json
import logging
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import toygap
from .data import FramePool, from_unit_range, to_unit_range
from .formats import Frame, load_rgb, read_manifest, write_manifest
from .predict import predict_to_scm
from .toygap import run_scrforge
from .training import (CutParams, ScrParams, save_checkpoint, train_cut,
                       train_scr)

logger = logging.getLogger(__name__)


def solve_and_eval(network, test_manifest, work_dir) -> dict:
    """Predict every test frame, solve each SCM1 through the CLI, and score.

    Returns the eval reports parsed from JSON, keyed "exclude"/"penalize".
    """
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    frames = read_manifest(test_manifest)

    intr_path = work_dir / "intrinsics.json"
    intr_path.write_text(json.dumps(frames[0].intrinsics))

    est_lines = []
    for frame in frames:
        scm_path = work_dir / f"{frame.frame_id}.scm"
        predict_to_scm(network, load_rgb(frame.rgb_path), scm_path)
        pose_path = work_dir / f"{frame.frame_id}.pose.json"
        run_scrforge("solve", "--scmap", scm_path, "--intrinsics", intr_path,
                     "--out", pose_path, "--seed", 0)
        est = json.loads(pose_path.read_text())
        est_lines.append(json.dumps({"id": frame.frame_id, **est}))
    est_path = work_dir / "estimates.jsonl"
    est_path.write_text("\n".join(est_lines) + "\n")

    reports = {}
    for policy in ("exclude", "penalize"):
        report_path = work_dir / f"report_{policy}.json"
        run_scrforge("eval", "--gt", test_manifest, "--est", est_path,
                     "--out", report_path, "--policy", policy)
        reports[policy] = json.loads(report_path.read_text())
    return reports


def translate_dataset(generator, source_manifest, out_dir) -> Path:
    """Run every source image through the converged translator; labels and
    poses are reused unchanged (the mapping preserves geometry)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = read_manifest(source_manifest)
    generator.eval()
    new_frames = []
    for frame in frames:
        x = to_unit_range(load_rgb(frame.rgb_path))[None]
        with torch.no_grad():
            out = generator(x)[0]
        rgb_path = out_dir / f"{frame.frame_id}.png"
        toygap.save_rgb(rgb_path, from_unit_range(out))
        new_frames.append(Frame(frame.frame_id, rgb_path, frame.scmap_path,
                                frame.pose, frame.intrinsics))
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(manifest_path, new_frames)
    return manifest_path


def probe_mae(generator, probe_source_manifest, probe_target_manifest) -> float:
    """Mean absolute pixel difference between translated probe-source images
    and the target-domain renderings of the same poses."""
    src = {f.frame_id: f for f in read_manifest(probe_source_manifest)}
    tgt = {f.frame_id: f for f in read_manifest(probe_target_manifest)}
    generator.eval()
    total = 0.0
    count = 0
    for frame_id, sf in sorted(src.items()):
        x = to_unit_range(load_rgb(sf.rgb_path))[None]
        with torch.no_grad():
            out = from_unit_range(generator(x)[0])
        target = load_rgb(tgt[frame_id].rgb_path)
        total += float(np.mean(np.abs(out.astype(np.float64)
                                      - target.astype(np.float64))))
        count += 1
    return total / count


@dataclass
class AblationResult:
    reports: dict          # arm -> {"exclude": ..., "penalize": ...}
    probe_mae_before: float
    probe_mae_after: float
    runtime_s: float

    def ordering_metric(self, arm: str) -> tuple[float, float]:
        """(median rotation deg, median translation m) under the penalize
        policy, so invalid-heavy arms rank worst."""
        rep = self.reports[arm]["penalize"]
        return rep["rotation_deg"]["median"], rep["translation_m"]["median"]


def run_ablation(out_root,
                 scr_steps: int = 2000,
                 cut_steps: int = 500,
                 train_frames: int = 160,
                 test_frames: int = 40,
                 seed: int = 0) -> AblationResult:
    start = time.perf_counter()
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    datasets = toygap.make_domain_datasets(out_root / "datasets",
                                           train_frames=train_frames,
                                           test_frames=test_frames,
                                           seed=seed)

    # pool-level histogram matching of the source set onto the target pool
    hm_dir = out_root / "source_hm"
    run_scrforge("histmatch", "--source-manifest", datasets.source_train,
                 "--target-dir", Path(datasets.target_train).parent,
                 "--out", hm_dir)
    hm_manifest = hm_dir / "manifest.jsonl"
    probe_hm_dir = out_root / "probe_hm"
    run_scrforge("histmatch", "--source-manifest", datasets.probe_source,
                 "--target-dir", Path(datasets.target_train).parent,
                 "--out", probe_hm_dir)

    # translation network on the unpaired pools
    cut_params = CutParams.toy(steps=cut_steps, seed=seed)
    untrained = train_cut(hm_manifest, datasets.target_train,
                          CutParams.toy(steps=0, seed=seed))
    mae_before = probe_mae(untrained.generator, probe_hm_dir / "manifest.jsonl",
                           datasets.probe_target)
    cut = train_cut(hm_manifest, datasets.target_train, cut_params,
                    checkpoint_path=out_root / "generator.pt")
    mae_after = probe_mae(cut.generator, probe_hm_dir / "manifest.jsonl",
                          datasets.probe_target)
    logger.info("probe MAE: %.2f before, %.2f after adaptation",
                mae_before, mae_after)

    adapted_manifest = translate_dataset(cut.generator, hm_manifest,
                                         out_root / "source_adapted")

    arms = {
        "blind": datasets.source_train,
        "histmatch": hm_manifest,
        "adapted": adapted_manifest,
        "supervised": datasets.target_train,
    }
    reports = {}
    for arm, manifest in arms.items():
        logger.info("training arm %r", arm)
        result = train_scr(manifest, ScrParams.toy(steps=scr_steps, seed=seed),
                           checkpoint_path=out_root / f"scr_{arm}.pt")
        reports[arm] = solve_and_eval(result.network, datasets.target_test,
                                      out_root / f"eval_{arm}")

    runtime = time.perf_counter() - start
    result = AblationResult(reports, mae_before, mae_after, runtime)
    summary = {
        "runtime_s": runtime,
        "probe_mae": {"before": mae_before, "after": mae_after},
        "arms": {arm: {"penalize_median": result.ordering_metric(arm),
                       "invalid_fraction":
                           reports[arm]["exclude"]["invalid_fraction"]}
                 for arm in arms},
    }
    (out_root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return result
