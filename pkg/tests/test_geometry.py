"""Tests for rotations, rigid transforms, and the pinhole model."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as ScipyRotation

from scrforge.errors import BehindCamera, NonPositiveDepth
from scrforge.geometry import (CameraIntrinsics, RigidTransform, Rotation,
                               compose, project, rotation_angle_deg, unproject)

from conftest import random_rotation, random_transform

INTR = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=180.0, width=640, height=360)


def rz(deg: float) -> Rotation:
    return Rotation.from_axis_angle([0, 0, 1], np.radians(deg))


class TestRotation:
    def test_unit_norm_after_construction(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            r = Rotation(rng.normal(size=4))
            assert abs(np.linalg.norm(r.quat) - 1.0) < 1e-9

    def test_canonical_w_nonnegative(self):
        r = Rotation(np.array([-0.5, 0.5, 0.5, 0.5]))
        assert r.quat[0] >= 0.0

    def test_matrix_is_orthonormal_with_unit_det(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            m = random_rotation(rng).matrix()
            assert np.allclose(m.T @ m, np.eye(3), atol=1e-9)
            assert abs(np.linalg.det(m) - 1.0) < 1e-9

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            r = random_rotation(rng)
            back = Rotation.from_matrix(r.matrix())
            assert np.allclose(back.quat, r.quat, atol=1e-9)

    def test_matches_scipy_on_vector_rotation(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            r = random_rotation(rng)
            w, x, y, z = r.quat
            oracle = ScipyRotation.from_quat([x, y, z, w])  # scipy is xyzw
            v = rng.normal(size=3)
            assert np.allclose(r.apply(v), oracle.apply(v), atol=1e-12)

    def test_compose_matches_matrix_product(self):
        rng = np.random.default_rng(7)
        a, b = random_rotation(rng), random_rotation(rng)
        assert np.allclose(a.compose(b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)


class TestRigidTransform:
    def test_compose_with_identity(self):
        rng = np.random.default_rng(8)
        t = random_transform(rng)
        out = compose(t, RigidTransform.identity())
        assert np.allclose(out.rotation.quat, t.rotation.quat, atol=1e-12)
        assert np.allclose(out.translation, t.translation, atol=1e-12)

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            t = random_transform(rng)
            ident = compose(t, t.inverse())
            assert np.allclose(ident.rotation.matrix(), np.eye(3), atol=1e-9)
            assert np.allclose(ident.translation, 0.0, atol=1e-9)

    def test_rz_angle_addition(self):
        # oracle: angle addition on quaternions about a shared axis
        a = RigidTransform(rz(30.0), np.zeros(3))
        b = RigidTransform(rz(60.0), np.zeros(3))
        expected = rz(90.0)
        assert np.allclose(compose(a, b).rotation.quat, expected.quat, atol=1e-12)

    def test_compose_associative(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            a, b, c = (random_transform(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert np.allclose(left.rotation.quat, right.rotation.quat, atol=1e-9)
            assert np.allclose(left.translation, right.translation, atol=1e-9)

    def test_apply_matches_direct_formula(self):
        rng = np.random.default_rng(11)
        t = random_transform(rng)
        p = rng.normal(size=(20, 3))
        assert np.allclose(t.apply(p), p @ t.rotation.matrix().T + t.translation)

    def test_camera_center(self):
        rng = np.random.default_rng(12)
        t = random_transform(rng)
        # the camera center must map to the camera-frame origin
        assert np.allclose(t.apply(t.camera_center()), 0.0, atol=1e-12)


class TestIntrinsics:
    def test_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=-1, fy=1, cx=0, cy=0, width=10, height=10)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=1, fy=1, cx=10, cy=0, width=10, height=10)


class TestProjection:
    def test_optical_axis(self):
        assert project(INTR, np.array([0.0, 0.0, 2.0])) == (320.0, 180.0, 2.0)

    def test_direct_formula(self):
        assert project(INTR, np.array([1.0, 0.0, 2.0])) == (570.0, 180.0, 2.0)

    def test_behind_camera(self):
        with pytest.raises(BehindCamera):
            project(INTR, np.array([0.0, 0.0, -1.0]))
        with pytest.raises(BehindCamera):
            project(INTR, np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))

    def test_unproject_examples(self):
        assert np.allclose(unproject(INTR, 320.0, 180.0, 2.0), [0.0, 0.0, 2.0])
        assert np.allclose(unproject(INTR, 570.0, 180.0, 2.0), [1.0, 0.0, 2.0])

    def test_unproject_rejects_nonpositive_depth(self):
        with pytest.raises(NonPositiveDepth):
            unproject(INTR, 320.0, 180.0, 0.0)

    def test_round_trip(self):
        rng = np.random.default_rng(13)
        u = rng.uniform(0, 640, 200)
        v = rng.uniform(0, 360, 200)
        d = rng.uniform(0.1, 50, 200)
        uu, vv, dd = project(INTR, unproject(INTR, u, v, d))
        assert np.max(np.abs(uu - u)) < 1e-9
        assert np.max(np.abs(vv - v)) < 1e-9
        assert np.max(np.abs(dd - d)) < 1e-9


class TestRotationAngle:
    def test_identity_is_zero(self):
        assert rotation_angle_deg(Rotation.identity(), Rotation.identity()) == 0.0

    def test_rz90(self):
        assert abs(rotation_angle_deg(Rotation.identity(), rz(90.0)) - 90.0) < 1e-9

    def test_relative_angle_matches_quaternion_oracle(self):
        # oracle: angle = 2 * arccos(|q_a . q_b|)
        rng = np.random.default_rng(14)
        for _ in range(200):
            a, b = random_rotation(rng), random_rotation(rng)
            dot = abs(float(a.quat @ b.quat))
            expected = np.degrees(2.0 * np.arccos(min(dot, 1.0)))
            assert abs(rotation_angle_deg(a, b) - expected) < 1e-6

    def test_known_offset_about_random_axis(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            base = random_rotation(rng)
            axis = rng.normal(size=3)
            theta = rng.uniform(1.0, 179.0)
            other = base.compose(Rotation.from_axis_angle(axis, np.radians(theta)))
            assert abs(rotation_angle_deg(base, other) - theta) < 1e-9

    def test_symmetric_and_triangle_inequality(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            a, b, c = (random_rotation(rng) for _ in range(3))
            assert abs(rotation_angle_deg(a, b) - rotation_angle_deg(b, a)) < 1e-9
            assert (rotation_angle_deg(a, c)
                    <= rotation_angle_deg(a, b) + rotation_angle_deg(b, c) + 1e-9)

    def test_range(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            ang = rotation_angle_deg(random_rotation(rng), random_rotation(rng))
            assert 0.0 <= ang <= 180.0
