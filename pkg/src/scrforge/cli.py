"""Command-line entry point: render | histmatch | solve | align | eval | e2e-toy.

Exit codes: 0 success, 1 domain error, 2 usage error. All randomness is
controlled by --seed flags, so identical invocations produce byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import evaluation, histmatch, pnp, registration, renderer, toyscene
from .config import PipelineConfig, load_config
from .errors import EmptyList, ManifestError, ScrforgeError
from .geometry import CameraIntrinsics
from .manifest import (FrameRecord, intrinsics_from_json, pose_from_json,
                       pose_to_json, read_manifest, write_manifest)
from .pointcloud import load_ply
from .scm import read_scm

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _load_intrinsics(path) -> CameraIntrinsics:
    with open(path) as fh:
        return intrinsics_from_json(json.load(fh))


def _read_rgb(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def _resolve_config(args) -> PipelineConfig:
    return load_config(getattr(args, "config", None))


def _intrinsics_from_settings(settings) -> CameraIntrinsics:
    cx = settings.cx if settings.cx is not None else settings.width / 2.0
    cy = settings.cy if settings.cy is not None else settings.height / 2.0
    return CameraIntrinsics(fx=settings.fx, fy=settings.fy, cx=cx, cy=cy,
                            width=settings.width, height=settings.height)


def _cmd_render(args) -> int:
    cfg = _resolve_config(args)
    cloud = load_ply(args.cloud)
    intr = _intrinsics_from_settings(cfg.render)
    sampler = renderer.PoseSamplerConfig.for_cloud(
        cloud,
        shrink_m=cfg.render.shrink_m,
        height_range=(cfg.render.height_min, cfg.render.height_max),
        pitch_range_deg=(-cfg.render.pitch_deg, cfg.render.pitch_deg),
        roll_range_deg=(-cfg.render.roll_deg, cfg.render.roll_deg),
        seed=args.seed,
    )
    manifest_path = renderer.render_dataset(
        cloud, sampler, intr, cfg.render.splat(), args.n, args.out,
        min_valid_fraction=cfg.render.min_valid_fraction,
        max_retries=cfg.render.max_retries)
    print(manifest_path)
    return 0


def _gather_images(directory) -> list[Path]:
    paths = sorted(p for p in Path(directory).iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ManifestError(f"no images found in {directory}")
    return paths


def _cmd_histmatch(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.source_manifest:
        records = read_manifest(args.source_manifest)
        base = Path(args.source_manifest).parent
        sources = [(rec, _read_rgb(base / rec.rgb)) for rec in records]
        masks = []
        for rec in records:
            if cfg.histmatch.mask_holes and rec.scmap is not None:
                masks.append(read_scm(base / rec.scmap)[1])
            else:
                masks.append(None)
    else:
        paths = _gather_images(args.source_dir)
        sources = [(p, _read_rgb(p)) for p in paths]
        masks = [None] * len(sources)

    target_cdf = histmatch.compute_cdf(
        [_read_rgb(p) for p in _gather_images(args.target_dir)])

    if cfg.histmatch.per_image:
        matched = []
        for (key, img), mask in zip(sources, masks):
            src_cdf = histmatch.compute_cdf([img], [mask])
            matched.append((key, histmatch.match(img, src_cdf, target_cdf, mask)))
        source_cdf = histmatch.compute_cdf([img for _, img in sources], masks)
    else:
        source_cdf = histmatch.compute_cdf([img for _, img in sources], masks)
        matched = [(key, histmatch.match(img, source_cdf, target_cdf, mask))
                   for (key, img), mask in zip(sources, masks)]

    if args.cdfs:
        with open(args.cdfs, "w") as fh:
            json.dump({"source": json.loads(source_cdf.to_json())["cdf"],
                       "target": json.loads(target_cdf.to_json())["cdf"]}, fh)
            fh.write("\n")

    if args.source_manifest:
        base = Path(args.source_manifest).parent
        new_records = []
        for (rec, _), (_, img) in zip(sources, matched):
            name = Path(rec.rgb).name
            Image.fromarray(img).save(out_dir / name)
            scmap_ref = rec.scmap
            if scmap_ref is not None:
                scmap_ref = os.path.relpath(base / scmap_ref, out_dir)
            new_records.append(FrameRecord(rec.frame_id, name, rec.intrinsics,
                                           scmap=scmap_ref, pose=rec.pose))
        write_manifest(out_dir / "manifest.jsonl", new_records)
        print(out_dir / "manifest.jsonl")
    else:
        for (path, _), (_, img) in zip(sources, matched):
            Image.fromarray(img).save(out_dir / Path(path).name)
        print(out_dir)
    return 0


def _correspondences_for(scmap, mask, intr, stride):
    h, w = mask.shape
    if (w, h) == (intr.width, intr.height):
        return pnp.sample_correspondences(scmap, mask, stride=stride, grid=False)
    if (intr.width % w == 0 and intr.height % h == 0
            and intr.width // w == intr.height // h):
        return pnp.sample_correspondences(scmap, mask, stride=intr.width // w,
                                          grid=True)
    raise ManifestError(
        f"scmap size {w}x{h} incompatible with image size "
        f"{intr.width}x{intr.height}")


def _estimate_to_json(est: pnp.PoseEstimate) -> dict:
    pose = pose_to_json(est.pose)
    return {"q": pose["q"], "t": pose["t"], "inliers": est.inlier_count,
            "rms": None if not np.isfinite(est.reprojection_rms_px)
            else est.reprojection_rms_px,
            "valid": est.valid}


def _cmd_solve(args) -> int:
    cfg = _resolve_config(args)
    intr = _load_intrinsics(args.intrinsics)
    scmap, mask = read_scm(args.scmap)
    corrs = _correspondences_for(scmap, mask, intr, args.stride or cfg.solve.stride)
    estimate = pnp.pnp_ransac(corrs, intr, cfg.solve.ransac(seed=args.seed))
    with open(args.out, "w") as fh:
        json.dump(_estimate_to_json(estimate), fh)
        fh.write("\n")
    print(args.out)
    return 0


def _load_markers(path) -> np.ndarray:
    with open(path) as fh:
        pts = np.asarray(json.load(fh), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ManifestError(f"{path}: marker list must be Nx3")
    return pts


def _cmd_align(args) -> int:
    cfg = _resolve_config(args)
    init = None
    if args.init:
        with open(args.init) as fh:
            init = pose_from_json(json.load(fh))
    src_is_markers = str(args.src).endswith(".json")
    dst_is_markers = str(args.dst).endswith(".json")
    if src_is_markers != dst_is_markers:
        raise ManifestError("src and dst must both be PLY or both marker JSON")

    if src_is_markers:
        src, dst = _load_markers(args.src), _load_markers(args.dst)
        if init is not None:
            src = init.apply(src)
        transform = registration.umeyama_rigid(src, dst)
        if init is not None:
            transform = transform.compose(init)
        rms = float(np.sqrt(np.mean(
            np.sum((dst - transform.apply(_load_markers(args.src))) ** 2, axis=1))))
        iterations = 1
    else:
        result = registration.icp(load_ply(args.src), load_ply(args.dst), init,
                                  cfg.align.icp(seed=args.seed))
        transform, rms, iterations = result.transform, result.rms_m, result.iterations

    with open(args.out, "w") as fh:
        json.dump({**pose_to_json(transform), "rms_m": rms,
                   "iterations": iterations}, fh)
        fh.write("\n")
    print(args.out)
    return 0


def _load_estimates(path) -> dict:
    estimates = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            estimates[str(data["id"])] = data
    return estimates


def _cmd_eval(args) -> int:
    gt_records = read_manifest(args.gt, check_files=False)
    estimates = _load_estimates(args.est)
    errors = []
    for rec in gt_records:
        if rec.pose is None:
            continue
        est = estimates.get(rec.frame_id)
        if est is None or not est.get("valid", False):
            errors.append(evaluation.PoseError(np.nan, np.nan, valid=False))
            continue
        est_pose = pose_from_json(est)
        errors.append(evaluation.pose_error(rec.pose, est_pose))
    report = evaluation.aggregate(errors, percentile_policy=args.policy)
    evaluation.write_report(args.out, report)
    table = evaluation.markdown_table([(args.method, report)])
    if args.markdown:
        Path(args.markdown).write_text(table)
    print(table, end="")
    return 0


def e2e_toy(out_dir,
            seed: int = 0,
            test_frames: int = 200,
            train_frames: int = 0,
            corrupt_fraction: float = 0.0,
            n_points: int = 200_000,
            cfg: PipelineConfig = PipelineConfig()) -> evaluation.EvalReport:
    """Oracle end-to-end pipeline on the procedural box room.

    Renders a test set (plus an optional training set for external
    consumers), solves every test frame from its own rendered scene
    coordinates via PnP-RANSAC, and writes report.json, table.md, and
    estimates.jsonl to out_dir. corrupt_fraction of the valid scene
    coordinates are replaced with uniform noise inside the room before
    solving, to exercise RANSAC robustness.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud = toyscene.make_box_room(n_points=n_points, seed=seed)
    intr = _intrinsics_from_settings(cfg.render)

    def sampler(sub_seed: int) -> renderer.PoseSamplerConfig:
        return renderer.PoseSamplerConfig.for_cloud(
            cloud,
            shrink_m=cfg.render.shrink_m,
            height_range=(cfg.render.height_min, cfg.render.height_max),
            pitch_range_deg=(-cfg.render.pitch_deg, cfg.render.pitch_deg),
            roll_range_deg=(-cfg.render.roll_deg, cfg.render.roll_deg),
            seed=sub_seed,
        )

    if train_frames > 0:
        renderer.render_dataset(cloud, sampler(seed), intr, cfg.render.splat(),
                                train_frames, out_dir / "train",
                                min_valid_fraction=cfg.render.min_valid_fraction,
                                max_retries=cfg.render.max_retries)

    test_manifest = renderer.render_dataset(
        cloud, sampler(seed + 1), intr, cfg.render.splat(),
        test_frames, out_dir / "test",
        min_valid_fraction=cfg.render.min_valid_fraction,
        max_retries=cfg.render.max_retries)

    records = read_manifest(test_manifest)
    lo, hi = np.zeros(3), np.array(toyscene.DEFAULT_ROOM_SIZE)
    noise_rng = np.random.default_rng(seed + 2)

    errors = []
    est_lines = []
    for index, rec in enumerate(records):
        scmap, mask = read_scm(out_dir / "test" / rec.scmap)
        if corrupt_fraction > 0.0:
            valid_idx = np.flatnonzero(mask.reshape(-1))
            n_corrupt = int(round(corrupt_fraction * len(valid_idx)))
            chosen = noise_rng.choice(valid_idx, size=n_corrupt, replace=False)
            noise = noise_rng.uniform(lo, hi, size=(n_corrupt, 3))
            flat = scmap.reshape(-1, 3)
            flat[chosen] = noise.astype(np.float32)
            scmap = flat.reshape(scmap.shape)
        corrs = _correspondences_for(scmap, mask, rec.intrinsics, cfg.solve.stride)
        estimate = pnp.pnp_ransac(corrs, rec.intrinsics,
                                  cfg.solve.ransac(seed=seed + index))
        est_lines.append(json.dumps({"id": rec.frame_id,
                                     **_estimate_to_json(estimate)}))
        errors.append(evaluation.pose_error(rec.pose, estimate))

    (out_dir / "estimates.jsonl").write_text("\n".join(est_lines) + "\n")
    report = evaluation.aggregate(errors)
    evaluation.write_report(out_dir / "report.json", report)
    table = evaluation.markdown_table([("oracle coordinates", report)])
    (out_dir / "table.md").write_text(table)
    return report


def _cmd_e2e_toy(args) -> int:
    report = e2e_toy(args.out, seed=args.seed, test_frames=args.test_frames,
                     train_frames=args.train_frames,
                     corrupt_fraction=args.corrupt_frac,
                     n_points=args.points, cfg=_resolve_config(args))
    print(f"median rotation error:    {report.rotation_deg.median:.4f} deg")
    print(f"median translation error: {report.translation_m.median:.4f} m")
    print(f"invalid fraction:         {report.invalid_fraction:.3f}")
    print(Path(args.out) / "report.json")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scrforge",
        description="Synthetic relocalization data and PnP-RANSAC pose tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a labeled dataset from a PLY cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("histmatch", help="match rendered colors onto a photo pool")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--source-manifest")
    group.add_argument("--source-dir")
    p.add_argument("--target-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cdfs", help="write source/target CDFs as JSON")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_histmatch)

    p = sub.add_parser("solve", help="estimate a pose from a scene-coordinate map")
    p.add_argument("--scmap", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("align", help="rigidly align two clouds or marker sets")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--init", help="initial transform JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("eval", help="compare estimates against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--markdown")
    p.add_argument("--method", default="estimate")
    p.add_argument("--policy", choices=evaluation.PERCENTILE_POLICIES,
                   default="exclude")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("e2e-toy",
                       help="end-to-end oracle pipeline on the procedural room")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-frames", type=int, default=200)
    p.add_argument("--train-frames", type=int, default=0)
    p.add_argument("--corrupt-frac", type=float, default=0.0)
    p.add_argument("--points", type=int, default=200_000)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_e2e_toy)

    return parser


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except (ScrforgeError, OSError) as exc:
        print(f"scrforge: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
