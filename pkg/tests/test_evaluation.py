"""Tests for pose-error metrics and aggregate reports."""

from __future__ import annotations

import numpy as np
import pytest

from scrforge.errors import EmptyList
from scrforge.evaluation import (EvalReport, PoseError, aggregate,
                                 markdown_table, pose_error, read_report,
                                 write_report)
from scrforge.geometry import RigidTransform, Rotation
from scrforge.pnp import PoseEstimate

from conftest import random_transform


def sort_oracle_percentile(values, p):
    """Independent linear-interpolation percentile over sorted values."""
    xs = sorted(values)
    if len(xs) == 1:
        return xs[0]
    rank = (len(xs) - 1) * p / 100.0
    lo = int(np.floor(rank))
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (rank - lo)


def make_estimate(pose: RigidTransform, valid: bool = True) -> PoseEstimate:
    return PoseEstimate(pose, 50 if valid else 0, np.ones(50, bool), 0.5, valid)


class TestPoseError:
    def test_exact_match_is_zero(self):
        rng = np.random.default_rng(91)
        t = random_transform(rng)
        err = pose_error(t, make_estimate(t))
        assert err.rotation_deg == 0.0
        assert err.translation_m == 0.0

    def test_rotation_about_camera_center(self):
        rng = np.random.default_rng(92)
        gt = random_transform(rng)
        # rotating the camera in place changes orientation, not the center
        spin = RigidTransform(Rotation.from_axis_angle([0, 0, 1], np.radians(5.0)),
                              np.zeros(3))
        est = spin.compose(gt)
        err = pose_error(gt, make_estimate(est))
        assert abs(err.rotation_deg - 5.0) < 1e-9
        assert err.translation_m < 1e-9

    def test_invalid_estimate_flagged(self):
        rng = np.random.default_rng(93)
        t = random_transform(rng)
        err = pose_error(t, make_estimate(t, valid=False))
        assert not err.valid

    def test_invariant_to_common_world_transform(self):
        rng = np.random.default_rng(94)
        for _ in range(50):
            gt, est, world = (random_transform(rng) for _ in range(3))
            base = pose_error(gt, est)
            moved = pose_error(gt.compose(world), est.compose(world))
            assert abs(base.rotation_deg - moved.rotation_deg) < 1e-9
            assert abs(base.translation_m - moved.translation_m) < 1e-9


class TestAggregate:
    def test_odd_count_median(self):
        errors = [PoseError(1.0, 0.1), PoseError(2.0, 0.2), PoseError(3.0, 0.3)]
        rep = aggregate(errors)
        assert rep.rotation_deg.median == 2.0
        assert rep.translation_m.median == pytest.approx(0.2)

    def test_matches_sort_oracle_for_all_lengths(self):
        rng = np.random.default_rng(95)
        for n in range(1, 201):
            rot = rng.uniform(0, 180, n)
            tr = rng.uniform(0, 5, n)
            errors = [PoseError(r, t) for r, t in zip(rot, tr)]
            rep = aggregate(errors)
            assert rep.rotation_deg.median == pytest.approx(
                sort_oracle_percentile(rot, 50), abs=1e-12)
            assert rep.rotation_deg.p95 == pytest.approx(
                sort_oracle_percentile(rot, 95), abs=1e-12)
            assert rep.translation_m.median == pytest.approx(
                sort_oracle_percentile(tr, 50), abs=1e-12)
            assert rep.translation_m.p95 == pytest.approx(
                sort_oracle_percentile(tr, 95), abs=1e-12)
            assert rep.rotation_deg.mean == pytest.approx(np.mean(rot))

    def test_invalid_fraction(self):
        errors = [PoseError(1.0, 0.1)] * 9 + [PoseError(np.nan, np.nan, valid=False)]
        rep = aggregate(errors)
        assert rep.invalid_fraction == pytest.approx(0.1)
        assert rep.frame_count == 10

    def test_median_leq_p95(self):
        rng = np.random.default_rng(96)
        for _ in range(20):
            errors = [PoseError(r, t) for r, t in
                      zip(rng.uniform(0, 180, 30), rng.uniform(0, 5, 30))]
            rep = aggregate(errors)
            assert rep.rotation_deg.median <= rep.rotation_deg.p95
            assert rep.translation_m.median <= rep.translation_m.p95

    def test_penalize_policy_saturates_tail(self):
        errors = [PoseError(1.0, 0.1)] * 6 + \
                 [PoseError(np.nan, np.nan, valid=False)] * 4
        excl = aggregate(errors, "exclude")
        pen = aggregate(errors, "penalize")
        assert np.isfinite(excl.rotation_deg.p95)
        assert np.isinf(pen.rotation_deg.p95)
        assert pen.rotation_deg.median == 1.0

    def test_empty_list(self):
        with pytest.raises(EmptyList):
            aggregate([])

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            aggregate([PoseError(1.0, 0.1)], "bogus")


class TestReportIo:
    def test_round_trip(self, tmp_path):
        errors = [PoseError(1.0, 0.1), PoseError(2.0, 0.25), PoseError(4.0, 0.5)]
        rep = aggregate(errors)
        path = tmp_path / "report.json"
        write_report(path, rep)
        back = read_report(path)
        assert back == rep

    def test_markdown_table_contains_rows(self):
        rep = aggregate([PoseError(2.9, 0.17), PoseError(3.1, 0.19)])
        table = markdown_table([("method-a", rep), ("method-b", rep)])
        lines = table.strip().splitlines()
        assert lines[0].startswith("| Method")
        assert len(lines) == 4
        assert "method-a" in lines[2]
