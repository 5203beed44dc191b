"""Training objectives: adversarial value, patch-contrastive, and L2 regression.

All losses are dtype-generic (float32 for training, float64 for the
finite-difference gradient checks) and operate on torch tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import AllInvalid, NonFiniteScore, ShapeMismatch

SCORE_EPS = 1e-7  # keeps log() finite at saturated discriminator outputs


@dataclass(frozen=True)
class LossConfig:
    lambda_gan: float = 1.0
    lambda_source: float = 1.0    # PatchNCE on translated source images
    lambda_identity: float = 1.0  # PatchNCE on target images fed through G
    tau: float = 0.07             # similarity temperature
    num_layers: int = 5           # encoder depths sampled for features
    num_locations: int = 256      # spatial samples per layer

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.num_layers < 1 or self.num_locations < 1:
            raise ValueError("num_layers and num_locations must be >= 1")


def gan_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Adversarial value E[log D(x_t)] + E[log(1 - D(G(x_s)))].

    The discriminator ascends this value; the mapping network descends it.
    Scores are probability maps in (0, 1); they are clamped to
    [SCORE_EPS, 1 - SCORE_EPS] so saturated predictions stay finite.

    Raises:
        NonFiniteScore: scores contain NaN or infinity.
    """
    if not (torch.isfinite(real_scores).all() and torch.isfinite(fake_scores).all()):
        raise NonFiniteScore("discriminator scores must be finite")
    real = real_scores.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
    fake = fake_scores.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
    return torch.log(real).mean() + torch.log1p(-fake).mean()


@dataclass(frozen=True)
class PatchFeatureBatch:
    """Sampled encoder features for the patch-contrastive loss.

    queries[l] and positives[l] are (B, S, D) stacks taken at identical
    spatial locations of the translated and the input image. The negatives
    for location s are, by construction, the positives at the other S - 1
    locations of the same image, so they always exclude location s.
    """

    queries: tuple[torch.Tensor, ...]
    positives: tuple[torch.Tensor, ...]

    def __post_init__(self) -> None:
        if len(self.queries) != len(self.positives) or not self.queries:
            raise ShapeMismatch("queries and positives must pair per layer")
        for q, p in zip(self.queries, self.positives):
            if q.shape != p.shape or q.ndim != 3:
                raise ShapeMismatch(f"bad feature stack shapes {tuple(q.shape)} "
                                    f"vs {tuple(p.shape)}")


def nce_term(query: torch.Tensor, positive: torch.Tensor,
             negatives: torch.Tensor, tau: float) -> torch.Tensor:
    """Single contrastive term: -log of the positive's share of similarity.

    query/positive: (D,), negatives: (N, D); N may be 0, giving exactly 0.
    """
    pos = query @ positive / tau
    if negatives.numel() == 0:
        return pos - pos  # zero of matching dtype, keeps the graph alive
    logits = torch.cat([pos.reshape(1), negatives @ query / tau])
    return -F.log_softmax(logits, dim=0)[0]


def patchnce_loss(batch: PatchFeatureBatch, cfg: LossConfig) -> torch.Tensor:
    """Multi-layer patch-contrastive loss.

    For every layer l and sampled location s the query (translated-image
    feature) is pulled toward the positive (input-image feature at the same
    location) and pushed from the input-image features at all other
    locations. Terms are summed over layers and locations and averaged over
    the batch. With a single location there are no negatives and the loss is
    exactly zero.
    """
    total = None
    for q, p in zip(batch.queries, batch.positives):
        b, s, _ = q.shape
        sim = torch.bmm(q, p.transpose(1, 2)) / cfg.tau  # (B, S, S)
        if s == 1:
            layer = sim.new_zeros(b)
        else:
            layer = -F.log_softmax(sim, dim=2).diagonal(dim1=1, dim2=2).sum(dim=1)
        total = layer if total is None else total + layer
    return total.mean()


def scr_l2_loss(pred: torch.Tensor, label: torch.Tensor,
                mask: torch.Tensor) -> torch.Tensor:
    """Mean Euclidean norm of the per-cell coordinate error over valid cells.

    Args:
        pred, label: (B, 3, h, w) or (3, h, w) scene-coordinate grids, meters.
        mask: matching (B, h, w) or (h, w); zero cells contribute nothing.

    Raises:
        AllInvalid: the mask has no valid cell.
        ShapeMismatch: pred/label/mask grids disagree.
    """
    if pred.ndim == 3:
        pred, label, mask = pred[None], label[None], mask[None]
    if pred.shape != label.shape or pred.shape[0] != mask.shape[0] \
            or pred.shape[2:] != mask.shape[1:]:
        raise ShapeMismatch(f"pred {tuple(pred.shape)}, label "
                            f"{tuple(label.shape)}, mask {tuple(mask.shape)}")
    valid = mask != 0
    if not bool(valid.any()):
        raise AllInvalid("label grid has no valid cell")
    diff = pred - label
    norms = torch.sqrt((diff * diff).sum(dim=1))  # (B, h, w)
    return norms[valid].mean()


def cut_total_loss(x_s: torch.Tensor,
                   x_t: torch.Tensor,
                   generator,
                   discriminator,
                   projectors,
                   cfg: LossConfig,
                   rng: torch.Generator | None = None
                   ) -> tuple[torch.Tensor, dict]:
    """Aggregate translation objective and its per-term breakdown.

    total = lambda_gan * gan + lambda_source * nce(source) +
    lambda_identity * nce(target through G). The identity term is skipped
    (absent from the breakdown) when its weight is zero. Both contrastive
    terms sample the same spatial locations, so with an identity mapping and
    identical batches they evaluate identically.

    `generator` must expose forward(x) and encoder_features(x); `projectors`
    maps the l-th feature stack to unit-norm embedding vectors.
    """
    if x_s.numel() == 0 or x_t.numel() == 0:
        raise ShapeMismatch("batches must be non-empty")
    if x_s.shape[1:] != x_t.shape[1:]:
        raise ShapeMismatch("source and target crops must share a size")
    fake = generator(x_s)
    breakdown = {"gan": gan_loss(discriminator(x_t), discriminator(fake))}

    feats_s = generator.encoder_features(x_s)[:cfg.num_layers]
    locations = sample_locations([f.shape for f in feats_s], cfg, rng)
    breakdown["nce_source"] = patchnce_loss(
        project_features(projectors, feats_s,
                         generator.encoder_features(fake)[:cfg.num_layers],
                         locations), cfg)
    if cfg.lambda_identity != 0.0:
        idt = generator(x_t)
        breakdown["nce_identity"] = patchnce_loss(
            project_features(projectors,
                             generator.encoder_features(x_t)[:cfg.num_layers],
                             generator.encoder_features(idt)[:cfg.num_layers],
                             locations), cfg)

    total = (cfg.lambda_gan * breakdown["gan"]
             + cfg.lambda_source * breakdown["nce_source"])
    if "nce_identity" in breakdown:
        total = total + cfg.lambda_identity * breakdown["nce_identity"]
    return total, breakdown


def sample_locations(shapes, cfg: LossConfig,
                     rng: torch.Generator | None = None) -> list[torch.Tensor]:
    """Per-layer flat pixel indices, at most cfg.num_locations each."""
    locations = []
    for shape in shapes:
        h, w = shape[-2], shape[-1]
        count = min(cfg.num_locations, h * w)
        locations.append(torch.randperm(h * w, generator=rng)[:count])
    return locations


def project_features(projectors, feats_pos, feats_query,
                     locations) -> PatchFeatureBatch:
    """Embed both feature streams at shared locations into unit-norm vectors.

    The same location tensor indexes the input image (positives) and the
    translated image (queries) of each layer.
    """
    queries, positives = [], []
    for layer, (fp, fq, loc) in enumerate(zip(feats_pos, feats_query, locations)):
        flat_p = fp.flatten(2).transpose(1, 2)[:, loc]  # (B, S, C)
        flat_q = fq.flatten(2).transpose(1, 2)[:, loc]
        positives.append(projectors[layer](flat_p))
        queries.append(projectors[layer](flat_q))
    return PatchFeatureBatch(tuple(queries), tuple(positives))


def sample_patch_features(generator, projectors, image: torch.Tensor,
                          translated: torch.Tensor, cfg: LossConfig,
                          rng: torch.Generator | None = None
                          ) -> PatchFeatureBatch:
    """Extract unit-norm features of both streams at shared random locations."""
    feats_pos = generator.encoder_features(image)[:cfg.num_layers]
    feats_query = generator.encoder_features(translated)[:cfg.num_layers]
    locations = sample_locations([f.shape for f in feats_pos], cfg, rng)
    return project_features(projectors, feats_pos, feats_query, locations)
