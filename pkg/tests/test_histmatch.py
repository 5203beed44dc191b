"""Tests for per-channel histogram matching."""

from __future__ import annotations

import numpy as np
import pytest

from scrforge.errors import EmptyPool
from scrforge.histmatch import (ChannelCDF, compute_cdf, ks_distance, match,
                                matching_lut)


def const_image(value, shape=(8, 8)):
    return np.full(shape + (3,), value, dtype=np.uint8)


def random_gamma_image(rng, gamma, shape=(32, 32)):
    """Uniform noise pushed through a per-channel gamma curve."""
    base = rng.random(shape + (3,))
    out = np.empty(shape + (3,), dtype=np.uint8)
    for ch in range(3):
        out[..., ch] = np.clip(base[..., ch] ** gamma[ch] * 255.0, 0, 255)
    return out


def cdf_of_image(img, mask=None):
    return compute_cdf([img], None if mask is None else [mask])


class TestComputeCdf:
    def test_mid_gray_is_step_at_128(self):
        cdf = cdf_of_image(const_image(128))
        for ch in range(3):
            assert np.all(cdf.values[ch, :128] == 0.0)
            assert np.all(cdf.values[ch, 128:] == 1.0)

    def test_half_zero_half_max(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[0] = 255
        cdf = cdf_of_image(img)
        assert np.all(cdf.values[:, :255] == 0.5)
        assert np.all(cdf.values[:, 255] == 1.0)

    def test_matches_pixel_rank_oracle(self):
        rng = np.random.default_rng(31)
        img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        cdf = cdf_of_image(img)
        flat = img.reshape(-1, 3)
        for ch in range(3):
            for level in range(256):
                expected = np.count_nonzero(flat[:, ch] <= level) / len(flat)
                assert abs(cdf.values[ch, level] - expected) < 1e-12

    def test_mask_excludes_pixels(self):
        img = const_image(10)
        img[0, 0] = 200
        mask = np.ones((8, 8), dtype=np.uint8)
        mask[0, 0] = 0
        cdf = cdf_of_image(img, mask)
        assert np.all(cdf.values[:, 10:] == 1.0)  # the 200 never counted

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            compute_cdf([const_image(5)], [np.zeros((8, 8), np.uint8)])

    def test_pooling_across_images(self):
        cdf = compute_cdf([const_image(0), const_image(255)])
        assert np.all(cdf.values[:, 0] == 0.5)

    def test_json_round_trip(self):
        rng = np.random.default_rng(32)
        cdf = cdf_of_image(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
        back = ChannelCDF.from_json(cdf.to_json())
        assert np.array_equal(back.values, cdf.values)


class TestMatch:
    def test_self_matching_changes_nothing(self):
        rng = np.random.default_rng(33)
        img = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        cdf = cdf_of_image(img)
        out = match(img, cdf, cdf)
        assert np.max(np.abs(out.astype(int) - img.astype(int))) <= 1

    def test_constant_maps_to_target_saturation_bin(self):
        # target CDF first reaches 1 at bin 200
        img = const_image(100)
        target = cdf_of_image(const_image(200))
        out = match(img, cdf_of_image(img), target)
        assert np.all(out == 200)

    def test_binary_image_against_mapping_rule(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[0] = 255
        src = cdf_of_image(img)
        rng = np.random.default_rng(34)
        target = cdf_of_image(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
        out = match(img, src, target)
        for ch in range(3):
            j_low = int(np.searchsorted(target.values[ch], 0.5, side="left"))
            j_high = int(np.searchsorted(target.values[ch], 1.0, side="left"))
            assert np.all(out[1][..., ch] == j_low)
            assert np.all(out[0][..., ch] == j_high)

    def test_lut_monotone(self):
        rng = np.random.default_rng(35)
        for _ in range(20):
            a = cdf_of_image(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
            b = cdf_of_image(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
            lut = matching_lut(a, b)
            assert np.all(np.diff(lut.astype(int), axis=1) >= 0)

    def test_invalid_pixels_pass_through(self):
        img = const_image(100)
        mask = np.ones((8, 8), dtype=np.uint8)
        mask[3, 3] = 0
        out = match(img, cdf_of_image(img), cdf_of_image(const_image(200)), mask)
        assert out[3, 3, 0] == 100
        assert out[0, 0, 0] == 200

    def test_ks_distance_decreases(self):
        # separated gamma bands keep the initial mismatch well above the
        # quantization floor (the largest source-level atom)
        rng = np.random.default_rng(36)
        for _ in range(20):
            src_img = random_gamma_image(rng, rng.uniform(0.4, 0.8, 3), (64, 64))
            tgt_img = random_gamma_image(rng, rng.uniform(1.5, 2.5, 3), (64, 64))
            src = cdf_of_image(src_img)
            tgt = cdf_of_image(tgt_img)
            before = ks_distance(src, tgt)
            after = ks_distance(cdf_of_image(match(src_img, src, tgt)), tgt)
            assert np.all(after < before)

    def test_idempotent_up_to_quantization(self):
        rng = np.random.default_rng(37)
        src_img = random_gamma_image(rng, [0.5, 1.5, 2.5])
        tgt = cdf_of_image(random_gamma_image(rng, [2.0, 0.7, 1.0]))
        once = match(src_img, cdf_of_image(src_img), tgt)
        twice = match(once, cdf_of_image(once), tgt)
        assert np.max(np.abs(twice.astype(int) - once.astype(int))) <= 1
