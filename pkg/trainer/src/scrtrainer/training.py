"""Training loops for the translation network and the coordinate regressor."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from . import data
from .errors import AllInvalid
from .losses import LossConfig, cut_total_loss, gan_loss, scr_l2_loss
from .networks import (MappingNetwork, PatchDiscriminator, SCRNetwork,
                       make_projectors)

logger = logging.getLogger(__name__)


def save_checkpoint(path, payload: dict) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


@dataclass(frozen=True)
class CutParams:
    """Translation-network hyperparameters; defaults are the paper-scale run
    (320-crop, 6 epochs at lr 2e-3, batch 10, Adam)."""

    preset: str = "paper"
    crop: int = 320
    batch_size: int = 10
    learning_rate: float = 2e-3
    epochs: int = 6
    steps: int | None = None       # overrides epochs when set
    seed: int = 0
    loss: LossConfig = LossConfig()

    @staticmethod
    def toy(steps: int = 400, seed: int = 0, **overrides) -> "CutParams":
        # the contrastive terms sum over layers x locations (5 x 64 = 320
        # terms); unit weights would swamp the adversarial term, so the toy
        # preset rescales them to per-term means
        base = CutParams(preset="toy", crop=96, batch_size=6,
                         learning_rate=2e-4, steps=steps, seed=seed,
                         loss=LossConfig(num_locations=64,
                                         lambda_source=1.0 / 320.0,
                                         lambda_identity=1.0 / 320.0))
        return replace(base, **overrides)


@dataclass(frozen=True)
class ScrParams:
    """Regressor hyperparameters; defaults are the paper-scale run
    (320-crop, lr 1e-4, weight decay 1e-5, batch 48, Adam)."""

    preset: str = "paper"
    crop: int = 320
    batch_size: int = 48
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    steps: int = 1000
    seed: int = 0

    @staticmethod
    def toy(steps: int = 1200, seed: int = 0, **overrides) -> "ScrParams":
        base = ScrParams(preset="toy", crop=96, batch_size=8,
                         learning_rate=1e-3, steps=steps, seed=seed)
        return replace(base, **overrides)


@dataclass
class CutResult:
    generator: MappingNetwork
    discriminator: PatchDiscriminator
    projectors: torch.nn.ModuleList
    history: list[dict]


def train_cut(source_manifest, target_manifest, params: CutParams,
              checkpoint_path=None) -> CutResult:
    """Adversarial alternating updates: D ascends the GAN value, G and the
    projection heads descend the aggregate translation loss."""
    torch.manual_seed(params.seed)
    rng = np.random.default_rng(params.seed)
    src = data.FramePool(source_manifest, require_labels=False)
    tgt = data.FramePool(target_manifest, require_labels=False)

    g = MappingNetwork.preset(params.preset)
    d = PatchDiscriminator.preset(params.preset)
    projectors = make_projectors(g, params.loss.num_layers)
    opt_d = torch.optim.Adam(d.parameters(), lr=params.learning_rate,
                             betas=(0.5, 0.999))
    opt_g = torch.optim.Adam(list(g.parameters()) + list(projectors.parameters()),
                             lr=params.learning_rate, betas=(0.5, 0.999))

    if params.steps is not None:
        steps = params.steps
    else:
        steps = max(1, params.epochs * len(src) // params.batch_size)

    feature_rng = torch.Generator()
    history = []
    for step in range(steps):
        x_s = data.sample_image_batch(src, rng, params.batch_size, params.crop)
        x_t = data.sample_image_batch(tgt, rng, params.batch_size, params.crop)

        # discriminator ascends the value with the translator frozen
        with torch.no_grad():
            fake = g(x_s)
        opt_d.zero_grad()
        d_value = gan_loss(d(x_t), d(fake))
        (-d_value).backward()
        opt_d.step()

        # translator + projection heads descend the aggregate loss
        feature_rng.manual_seed(params.seed * 1_000_003 + step)
        opt_g.zero_grad()
        total, breakdown = cut_total_loss(x_s, x_t, g, d, projectors,
                                          params.loss, feature_rng)
        total.backward()
        opt_g.step()

        history.append({"step": step, "total": float(total.detach()),
                        **{k: float(v.detach()) for k, v in breakdown.items()}})
        if step % 50 == 0:
            logger.info("cut step %d: total %.4f gan %.4f", step,
                        history[-1]["total"], history[-1]["gan"])

    result = CutResult(g, d, projectors, history)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, {
            "preset": params.preset,
            "generator": g.state_dict(),
            "discriminator": d.state_dict(),
            "projectors": projectors.state_dict(),
        })
    return result


def label_statistics(pool, max_frames: int = 32):
    """Mean and standard deviation of valid label coordinates, for the
    regressor's fixed output anchor."""
    values = []
    for index in range(min(len(pool), max_frames)):
        scmap, mask = pool.label(index)
        values.append(scmap[mask != 0])
    stacked = np.concatenate(values, axis=0)
    if len(stacked) == 0:
        logger.warning("no valid label cell in the pool sample; "
                       "output anchor stays at identity")
        return np.zeros(3), np.ones(3)
    return stacked.mean(axis=0), np.maximum(stacked.std(axis=0), 1e-3)


@dataclass
class ScrResult:
    network: SCRNetwork
    losses: list[float]


def train_scr(manifest, params: ScrParams, checkpoint_path=None) -> ScrResult:
    """Minimize the masked coordinate-regression loss over random crops."""
    torch.manual_seed(params.seed)
    rng = np.random.default_rng(params.seed)
    pool = data.FramePool(manifest, require_labels=True)

    net = SCRNetwork.preset(params.preset)
    net.set_output_transform(*label_statistics(pool))
    opt = torch.optim.Adam(net.parameters(), lr=params.learning_rate,
                           weight_decay=params.weight_decay)
    # the norm loss keeps unit-magnitude gradients near the optimum, so a
    # decaying step size is what actually closes the last centimeters
    schedule = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=max(params.steps, 1), eta_min=params.learning_rate * 1e-2)
    losses: list[float] = []
    for step in range(params.steps):
        batch = data.sample_scr_batch(pool, rng, params.batch_size, params.crop)
        opt.zero_grad()
        try:
            loss = scr_l2_loss(net(batch.images), batch.labels, batch.masks)
        except AllInvalid:
            logger.warning("scr step %d: batch has no valid label cell, skipped",
                           step)
            continue
        loss.backward()
        opt.step()
        schedule.step()
        losses.append(float(loss.detach()))
        if step % 100 == 0:
            logger.info("scr step %d: loss %.4f m", step, losses[-1])

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, {"preset": params.preset,
                                          "network": net.state_dict(),
                                          "losses": losses})
    return ScrResult(net, losses)


def load_scr_checkpoint(path) -> SCRNetwork:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    net = SCRNetwork.preset(payload["preset"])
    net.load_state_dict(payload["network"])
    net.eval()
    return net


def load_generator_checkpoint(path) -> MappingNetwork:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    g = MappingNetwork.preset(payload["preset"])
    g.load_state_dict(payload["generator"])
    g.eval()
    return g
