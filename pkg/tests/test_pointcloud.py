"""Tests for PLY io, merging, bounding boxes, and the spatial index."""

from __future__ import annotations

import numpy as np
import pytest

from scrforge.errors import (EmptyCloud, EmptyIndex, LengthMismatch,
                             MissingProperty, ParseError)
from scrforge.geometry import RigidTransform
from scrforge.pointcloud import (ColorPointCloud, SpatialIndex, bounding_box,
                                 load_ply, merge, save_ply, voxel_downsample)

from conftest import random_transform


def random_cloud(rng: np.random.Generator, n: int) -> ColorPointCloud:
    return ColorPointCloud(rng.uniform(-5, 5, (n, 3)).astype(np.float32),
                           rng.integers(0, 256, (n, 3), dtype=np.uint8))


ASCII_PLY = """ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
end_header
0 0 0 255 0 0
1.5 -2 3 0 255 0
-0.25 4 1e2 0 0 255
"""


class TestPly:
    def test_ascii_known_values(self, tmp_path):
        path = tmp_path / "tri.ply"
        path.write_text(ASCII_PLY)
        cloud = load_ply(path)
        assert len(cloud) == 3
        assert np.allclose(cloud.positions,
                           [[0, 0, 0], [1.5, -2, 3], [-0.25, 4, 100]])
        assert np.array_equal(cloud.colors,
                              [[255, 0, 0], [0, 255, 0], [0, 0, 255]])

    def test_missing_color_property(self, tmp_path):
        path = tmp_path / "nored.ply"
        path.write_text(ASCII_PLY.replace("property uchar blue\n", "")
                        .replace("255 0 0", "255 0").replace("0 255 0", "0 255")
                        .replace("0 0 255", "0 0"))
        with pytest.raises(MissingProperty):
            load_ply(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.ply"
        path.write_text("\n".join(ASCII_PLY.splitlines()[:-1]) + "\n")
        with pytest.raises(ParseError):
            load_ply(path)

    def test_not_a_ply(self, tmp_path):
        path = tmp_path / "bogus.ply"
        path.write_bytes(b"OFF\n0 0 0\n")
        with pytest.raises(ParseError):
            load_ply(path)

    @pytest.mark.parametrize("binary", [True, False])
    def test_round_trip_bit_exact(self, tmp_path, binary):
        rng = np.random.default_rng(21)
        cloud = random_cloud(rng, 500)
        path = tmp_path / "cloud.ply"
        save_ply(cloud, path, binary=binary)
        back = load_ply(path)
        assert np.array_equal(
            back.positions.view(np.uint32), cloud.positions.view(np.uint32))
        assert np.array_equal(back.colors, cloud.colors)

    def test_extra_properties_skipped(self, tmp_path):
        text = ASCII_PLY.replace(
            "property uchar blue\n",
            "property uchar blue\nproperty float intensity\n")
        text = text.replace("255 0 0", "255 0 0 0.5")
        text = text.replace("0 255 0\n", "0 255 0 0.25\n")
        text = text.replace("0 0 255", "0 0 255 0.125")
        path = tmp_path / "extra.ply"
        path.write_text(text)
        cloud = load_ply(path)
        assert len(cloud) == 3
        assert np.array_equal(cloud.colors[0], [255, 0, 0])


class TestCloud:
    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            ColorPointCloud(np.zeros((3, 3), np.float32), np.zeros((2, 3), np.uint8))

    def test_nonfinite_rejected(self):
        pos = np.zeros((2, 3), np.float32)
        pos[1, 2] = np.nan
        with pytest.raises(ValueError):
            ColorPointCloud(pos, np.zeros((2, 3), np.uint8))


class TestMerge:
    def test_single_identity(self):
        rng = np.random.default_rng(22)
        cloud = random_cloud(rng, 100)
        out = merge([cloud], [RigidTransform.identity()])
        assert np.array_equal(
            out.positions.view(np.uint32), cloud.positions.view(np.uint32))
        assert np.array_equal(out.colors, cloud.colors)

    def test_concatenation_size(self):
        rng = np.random.default_rng(23)
        c1, c2 = random_cloud(rng, 60), random_cloud(rng, 40)
        ident = RigidTransform.identity()
        out = merge([c1, c2], [ident, ident])
        assert len(out) == 100
        assert np.array_equal(out.colors[:60], c1.colors)

    def test_against_per_point_oracle(self):
        rng = np.random.default_rng(24)
        clouds = [random_cloud(rng, 100), random_cloud(rng, 100)]
        transforms = [random_transform(rng), random_transform(rng)]
        out = merge(clouds, transforms)
        offset = 0
        for cloud, tf in zip(clouds, transforms):
            r = tf.rotation.matrix()
            for i in range(len(cloud)):
                expected = (r @ cloud.positions[i].astype(np.float64)
                            + tf.translation).astype(np.float32)
                assert np.array_equal(out.positions[offset + i], expected)
            offset += len(cloud)

    def test_length_mismatch(self):
        rng = np.random.default_rng(25)
        with pytest.raises(LengthMismatch):
            merge([random_cloud(rng, 5)], [])


class TestBoundingBox:
    def test_single_point(self):
        cloud = ColorPointCloud(np.array([[1.0, 2.0, 3.0]], np.float32),
                                np.zeros((1, 3), np.uint8))
        lo, hi = bounding_box(cloud)
        assert np.allclose(lo, [1, 2, 3]) and np.allclose(hi, [1, 2, 3])

    def test_two_points(self):
        cloud = ColorPointCloud(
            np.array([[0, 0, 0], [1, 2, 3]], np.float32), np.zeros((2, 3), np.uint8))
        lo, hi = bounding_box(cloud)
        assert np.allclose(lo, [0, 0, 0]) and np.allclose(hi, [1, 2, 3])

    def test_against_fold_oracle(self):
        rng = np.random.default_rng(26)
        cloud = random_cloud(rng, 1000)
        lo, hi = bounding_box(cloud)
        fold_lo = np.full(3, np.inf)
        fold_hi = np.full(3, -np.inf)
        for p in cloud.positions:
            fold_lo = np.minimum(fold_lo, p)
            fold_hi = np.maximum(fold_hi, p)
        assert np.array_equal(lo, fold_lo) and np.array_equal(hi, fold_hi)

    def test_empty_cloud(self):
        empty = ColorPointCloud(np.empty((0, 3), np.float32),
                                np.empty((0, 3), np.uint8))
        with pytest.raises(EmptyCloud):
            bounding_box(empty)


class TestSpatialIndex:
    def test_query_at_indexed_point(self):
        rng = np.random.default_rng(27)
        cloud = random_cloud(rng, 50)
        index = SpatialIndex(cloud)
        idx, d2 = index.nearest_neighbor(cloud.positions[17])
        assert idx == 17
        assert d2 == 0.0

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(28)
        cloud = random_cloud(rng, 1000)
        index = SpatialIndex(cloud)
        pos = cloud.positions.astype(np.float64)
        for _ in range(100):
            q = rng.uniform(-6, 6, 3)
            idx, d2 = index.nearest_neighbor(q)
            oracle_d2 = np.sum((pos - q) ** 2, axis=1)
            assert idx == int(np.argmin(oracle_d2))
            assert d2 == oracle_d2.min()

    def test_tie_breaks_to_lowest_index(self):
        pos = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], np.float32)
        index = SpatialIndex(ColorPointCloud(pos, np.zeros((4, 3), np.uint8)))
        idx, d2 = index.nearest_neighbor(np.zeros(3))
        assert idx == 0
        assert d2 == 1.0

    def test_empty_index(self):
        empty = ColorPointCloud(np.empty((0, 3), np.float32),
                                np.empty((0, 3), np.uint8))
        with pytest.raises(EmptyIndex):
            SpatialIndex(empty).nearest_neighbor(np.zeros(3))

    def test_leaf_size_does_not_change_results(self):
        rng = np.random.default_rng(29)
        cloud = random_cloud(rng, 300)
        queries = rng.uniform(-6, 6, (50, 3))
        results = []
        for leaf in (2, 16, 64):
            index = SpatialIndex(cloud, leaf_size=leaf)
            results.append([index.nearest_neighbor(q) for q in queries])
        assert results[0] == results[1] == results[2]


class TestVoxelDownsample:
    def test_keeps_first_point_per_voxel(self):
        pos = np.array([[0.001, 0, 0], [0.002, 0, 0], [0.1, 0, 0]], np.float32)
        colors = np.array([[1, 1, 1], [2, 2, 2], [3, 3, 3]], np.uint8)
        out = voxel_downsample(ColorPointCloud(pos, colors), voxel_m=0.005)
        assert len(out) == 2
        assert np.array_equal(out.colors[0], [1, 1, 1])
