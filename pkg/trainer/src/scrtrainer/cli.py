"""Command line: train-cut | train-scr | predict | ablation.

Training hyperparameters load from a TOML file with [cut] and [scr]
sections; keys mirror the dataclass fields (crop, batch_size,
learning_rate, ...). Missing keys keep the preset defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ablation import run_ablation
from .errors import TrainerError
from .formats import load_rgb
from .losses import LossConfig
from .predict import predict_to_scm
from .training import (CutParams, ScrParams, load_scr_checkpoint, train_cut,
                       train_scr)


def _load_params(config_path, preset: str, seed: int
                 ) -> tuple[CutParams, ScrParams]:
    cut = CutParams(seed=seed) if preset == "paper" else CutParams.toy(seed=seed)
    scr = ScrParams(seed=seed) if preset == "paper" else ScrParams.toy(seed=seed)
    if config_path is None:
        return cut, scr
    with open(config_path, "rb") as fh:
        data = tomllib.load(fh)
    cut_data = dict(data.get("cut", {}))
    loss_keys = {k: cut_data.pop(k) for k in list(cut_data)
                 if k in ("lambda_gan", "lambda_source", "lambda_identity",
                          "tau", "num_layers", "num_locations")}
    if loss_keys:
        cut = replace(cut, loss=replace(cut.loss, **loss_keys))
    if cut_data:
        cut = replace(cut, **cut_data)
    if "scr" in data:
        scr = replace(scr, **data["scr"])
    return cut, scr


def main(argv=None) -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = argparse.ArgumentParser(prog="scrtrainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-cut", help="train the image translation network")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.pt)")
    p.add_argument("--preset", choices=("paper", "toy"), default="toy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("train-scr", help="train the coordinate regressor")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.pt)")
    p.add_argument("--preset", choices=("paper", "toy"), default="toy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")

    p = sub.add_parser("predict", help="write a stride-8 SCM1 prediction")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablation", help="run the training-strategy ladder")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scr-steps", type=int, default=2000)
    p.add_argument("--cut-steps", type=int, default=500)
    p.add_argument("--test-frames", type=int, default=40)

    args = parser.parse_args(argv)
    try:
        if args.command == "train-cut":
            cut, _ = _load_params(args.config, args.preset, args.seed)
            train_cut(args.source, args.target, cut, checkpoint_path=args.out)
        elif args.command == "train-scr":
            _, scr = _load_params(args.config, args.preset, args.seed)
            result = train_scr(args.manifest, scr, checkpoint_path=args.out)
            print(f"final loss {result.losses[-1]:.4f} m")
        elif args.command == "predict":
            net = load_scr_checkpoint(args.checkpoint)
            predict_to_scm(net, load_rgb(args.image), args.out)
            print(args.out)
        elif args.command == "ablation":
            result = run_ablation(args.out, scr_steps=args.scr_steps,
                                  cut_steps=args.cut_steps,
                                  test_frames=args.test_frames, seed=args.seed)
            for arm in ("blind", "histmatch", "adapted", "supervised"):
                rot, trans = result.ordering_metric(arm)
                print(f"{arm:11s} median {rot:8.2f} deg  {trans:7.3f} m")
            print(f"runtime {result.runtime_s:.0f} s")
    except (TrainerError, OSError) as exc:
        print(f"scrtrainer: error: {exc}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
