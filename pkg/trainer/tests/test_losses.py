"""Loss tests: spec examples, brute-force oracles, finite-difference gradients."""

from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from scrtrainer.errors import AllInvalid, NonFiniteScore, ShapeMismatch
from scrtrainer.losses import (LossConfig, PatchFeatureBatch, cut_total_loss,
                               gan_loss, nce_term, patchnce_loss,
                               sample_patch_features, scr_l2_loss)
from scrtrainer.networks import MappingNetwork, make_projectors

torch.manual_seed(0)


def finite_difference_check(fn, tensors, n_coords=24, eps=1e-6, rtol=1e-4,
                            seed=0):
    """Compare analytic gradients with central differences at float64.

    Checks n_coords randomly chosen coordinates of each input tensor.
    """
    tensors = [t.detach().double().requires_grad_(True) for t in tensors]
    out = fn(*tensors)
    out.backward()
    rng = np.random.default_rng(seed)
    for t in tensors:
        flat = t.detach().reshape(-1)
        grad = t.grad.reshape(-1)
        coords = rng.choice(flat.numel(), min(n_coords, flat.numel()),
                            replace=False)
        for c in coords:
            with torch.no_grad():
                orig = flat[c].item()
                flat[c] = orig + eps
                hi = fn(*[x.detach() for x in tensors]).item()
                flat[c] = orig - eps
                lo = fn(*[x.detach() for x in tensors]).item()
                flat[c] = orig
            fd = (hi - lo) / (2 * eps)
            an = grad[c].item()
            rel = abs(an - fd) / max(1e-8, abs(an), abs(fd))
            assert rel < rtol, f"coord {c}: analytic {an}, fd {fd}, rel {rel}"


class TestGanLoss:
    def test_perfect_discriminator_is_zero(self):
        real = torch.ones(2, 1, 4, 4)
        fake = torch.zeros(2, 1, 4, 4)
        assert abs(float(gan_loss(real, fake))) < 1e-6

    def test_coin_flip_scores(self):
        half = torch.full((3, 1, 5, 5), 0.5)
        expected = 2.0 * math.log(0.5)
        assert abs(float(gan_loss(half, half)) - expected) < 1e-6

    def test_saturated_fake_stays_finite(self):
        real = torch.full((1, 1, 2, 2), 0.5)
        fake = torch.ones(1, 1, 2, 2)  # log(1 - 1) would be -inf
        value = float(gan_loss(real, fake))
        assert np.isfinite(value)
        assert value < -10.0

    def test_nonfinite_scores_rejected(self):
        bad = torch.tensor([[0.5, float("nan")]])
        with pytest.raises(NonFiniteScore):
            gan_loss(bad, bad)

    def test_gradient_matches_finite_differences(self):
        rng = torch.Generator().manual_seed(1)
        real = torch.rand(2, 1, 3, 3, generator=rng) * 0.8 + 0.1
        fake = torch.rand(2, 1, 3, 3, generator=rng) * 0.8 + 0.1
        finite_difference_check(gan_loss, [real, fake])


def brute_force_patchnce(queries, positives, tau):
    """Independent double-loop evaluation of the contrastive loss."""
    total = 0.0
    batch = queries[0].shape[0]
    for b in range(batch):
        for q_layer, p_layer in zip(queries, positives):
            s = q_layer.shape[1]
            for loc in range(s):
                q = q_layer[b, loc].numpy()
                pos = math.exp(float(q @ p_layer[b, loc].numpy()) / tau)
                neg = sum(math.exp(float(q @ p_layer[b, other].numpy()) / tau)
                          for other in range(s) if other != loc)
                total += -math.log(pos / (pos + neg)) if s > 1 else 0.0
    return total / batch


def random_unit_features(rng, layers, batch, s, dim):
    out = []
    for _ in range(layers):
        f = torch.randn(batch, s, dim, generator=rng, dtype=torch.float64)
        out.append(torch.nn.functional.normalize(f, dim=-1))
    return tuple(out)


class TestPatchNce:
    def test_single_location_is_exactly_zero(self):
        rng = torch.Generator().manual_seed(2)
        q = random_unit_features(rng, 2, 3, 1, 16)
        batch = PatchFeatureBatch(q, q)
        assert float(patchnce_loss(batch, LossConfig())) == 0.0

    def test_orthogonal_negative_hand_value(self):
        # query equals the positive; one orthogonal negative; tau = 0.07
        q = torch.tensor([1.0, 0.0], dtype=torch.float64)
        neg = torch.tensor([[0.0, 1.0]], dtype=torch.float64)
        value = float(nce_term(q, q, neg, 0.07))
        expected = math.log1p(math.exp(-1.0 / 0.07))
        assert abs(value - expected) < 1e-9

    def test_matches_brute_force_loop(self):
        rng = torch.Generator().manual_seed(3)
        for s in (2, 5, 9):
            feats_q = random_unit_features(rng, 3, 2, s, 8)
            feats_p = random_unit_features(rng, 3, 2, s, 8)
            batch = PatchFeatureBatch(feats_q, feats_p)
            ours = float(patchnce_loss(batch, LossConfig(tau=0.07)))
            oracle = brute_force_patchnce(feats_q, feats_p, 0.07)
            assert abs(ours - oracle) < 1e-6

    def test_nonnegative(self):
        rng = torch.Generator().manual_seed(4)
        for _ in range(20):
            batch = PatchFeatureBatch(random_unit_features(rng, 2, 2, 6, 8),
                                      random_unit_features(rng, 2, 2, 6, 8))
            assert float(patchnce_loss(batch, LossConfig())) >= 0.0

    def test_shape_mismatch_rejected(self):
        rng = torch.Generator().manual_seed(5)
        q = random_unit_features(rng, 2, 2, 4, 8)
        p = random_unit_features(rng, 1, 2, 4, 8)
        with pytest.raises(ShapeMismatch):
            PatchFeatureBatch(q, p)
        p2 = random_unit_features(rng, 2, 2, 5, 8)
        with pytest.raises(ShapeMismatch):
            PatchFeatureBatch(q, p2)

    def test_gradient_matches_finite_differences(self):
        rng = torch.Generator().manual_seed(6)
        q = random_unit_features(rng, 1, 2, 4, 6)[0]
        p = random_unit_features(rng, 1, 2, 4, 6)[0]

        def fn(qq, pp):
            return patchnce_loss(PatchFeatureBatch((qq,), (pp,)),
                                 LossConfig(tau=0.2))

        finite_difference_check(fn, [q, p])


class TestScrL2:
    def test_zero_on_equal(self):
        pred = torch.randn(2, 3, 4, 5)
        mask = torch.ones(2, 4, 5)
        assert float(scr_l2_loss(pred, pred.clone(), mask)) == 0.0

    def test_three_four_five(self):
        pred = torch.zeros(1, 3, 2, 2)
        label = torch.zeros(1, 3, 2, 2)
        mask = torch.zeros(1, 2, 2)
        pred[0, 0, 1, 1] = 3.0
        pred[0, 1, 1, 1] = 4.0
        mask[0, 1, 1] = 1
        assert abs(float(scr_l2_loss(pred, label, mask)) - 5.0) < 1e-7

    def test_matches_per_cell_loop(self):
        rng = torch.Generator().manual_seed(7)
        pred = torch.randn(2, 3, 5, 6, generator=rng, dtype=torch.float64)
        label = torch.randn(2, 3, 5, 6, generator=rng, dtype=torch.float64)
        mask = (torch.rand(2, 5, 6, generator=rng) > 0.4).to(torch.uint8)
        ours = float(scr_l2_loss(pred, label, mask))
        total, count = 0.0, 0
        for b in range(2):
            for j in range(5):
                for i in range(6):
                    if mask[b, j, i]:
                        d = (pred[b, :, j, i] - label[b, :, j, i]).numpy()
                        total += math.sqrt(float((d * d).sum()))
                        count += 1
        assert abs(ours - total / count) < 1e-6

    def test_all_invalid_raises(self):
        pred = torch.randn(1, 3, 2, 2)
        with pytest.raises(AllInvalid):
            scr_l2_loss(pred, pred, torch.zeros(1, 2, 2))

    def test_invariant_to_cell_permutation(self):
        rng = torch.Generator().manual_seed(8)
        pred = torch.randn(1, 3, 4, 4, generator=rng)
        label = torch.randn(1, 3, 4, 4, generator=rng)
        mask = (torch.rand(1, 4, 4, generator=rng) > 0.3).to(torch.uint8)
        base = float(scr_l2_loss(pred, label, mask))
        perm = torch.randperm(16, generator=rng)
        shuffle = lambda t: t.reshape(*t.shape[:-2], 16)[..., perm].reshape(t.shape)
        shuffled = float(scr_l2_loss(shuffle(pred), shuffle(label), shuffle(mask)))
        assert abs(base - shuffled) < 1e-6

    def test_gradient_matches_finite_differences(self):
        rng = torch.Generator().manual_seed(9)
        pred = torch.randn(1, 3, 3, 4, generator=rng, dtype=torch.float64)
        label = torch.randn(1, 3, 3, 4, generator=rng, dtype=torch.float64)
        mask = (torch.rand(1, 3, 4, generator=rng) > 0.3).to(torch.uint8)
        finite_difference_check(lambda p: scr_l2_loss(p, label, mask), [pred])


class _IdentityShim:
    """Identity mapping that reuses a real encoder for features."""

    def __init__(self, encoder_source: MappingNetwork):
        self._enc = encoder_source

    def __call__(self, x):
        return x

    def encoder_features(self, x):
        return self._enc.encoder_features(x)


class TestCutTotal:
    def setup_method(self):
        torch.manual_seed(10)
        self.g = MappingNetwork.preset("toy")
        from scrtrainer.networks import PatchDiscriminator
        self.d = PatchDiscriminator.preset("toy")
        self.projectors = make_projectors(self.g)
        self.x_s = torch.rand(2, 3, 16, 16) * 2 - 1
        self.x_t = torch.rand(2, 3, 16, 16) * 2 - 1

    def test_weight_zeroing_leaves_gan_alone(self):
        cfg = LossConfig(lambda_source=0.0, lambda_identity=0.0,
                         num_locations=16)
        rng = torch.Generator().manual_seed(11)
        with torch.no_grad():
            total, breakdown = cut_total_loss(self.x_s, self.x_t, self.g,
                                              self.d, self.projectors, cfg, rng)
        assert "nce_identity" not in breakdown
        assert abs(float(total) - float(breakdown["gan"])) < 1e-7

    def test_identity_weight_zero_drops_term(self):
        cfg = LossConfig(lambda_identity=0.0, num_locations=16)
        rng = torch.Generator().manual_seed(12)
        with torch.no_grad():
            _, breakdown = cut_total_loss(self.x_s, self.x_t, self.g, self.d,
                                          self.projectors, cfg, rng)
        assert set(breakdown) == {"gan", "nce_source"}

    def test_total_equals_weighted_sum_of_terms(self):
        cfg = LossConfig(num_locations=16)
        rng = torch.Generator().manual_seed(13)
        g64, d64 = self.g.double(), self.d.double()
        proj64 = self.projectors.double()
        with torch.no_grad():
            total, breakdown = cut_total_loss(self.x_s.double(),
                                              self.x_t.double(),
                                              g64, d64, proj64, cfg, rng)
        recomputed = (cfg.lambda_gan * float(breakdown["gan"])
                      + cfg.lambda_source * float(breakdown["nce_source"])
                      + cfg.lambda_identity * float(breakdown["nce_identity"]))
        assert abs(float(total) - recomputed) < 1e-6

    def test_identity_mapping_equalizes_terms(self):
        # same batch through an identity G with frozen random projection heads
        shim = _IdentityShim(self.g)
        cfg = LossConfig(lambda_gan=0.0, num_locations=16)
        rng = torch.Generator().manual_seed(14)
        with torch.no_grad():
            _, breakdown = cut_total_loss(self.x_s, self.x_s, shim, self.d,
                                          self.projectors, cfg, rng)
        assert abs(float(breakdown["nce_source"])
                   - float(breakdown["nce_identity"])) < 1e-7

    def test_projected_features_are_unit_norm(self):
        cfg = LossConfig(num_locations=16)
        rng = torch.Generator().manual_seed(15)
        with torch.no_grad():
            batch = sample_patch_features(self.g, self.projectors, self.x_s,
                                          self.g(self.x_s), cfg, rng)
        for q, p in zip(batch.queries, batch.positives):
            assert torch.allclose(q.norm(dim=-1), torch.ones_like(q.norm(dim=-1)),
                                  atol=1e-6)
            assert torch.allclose(p.norm(dim=-1), torch.ones_like(p.norm(dim=-1)),
                                  atol=1e-6)
