"""Shared fixtures and synthetic-scene helpers."""

from __future__ import annotations

import numpy as np
import pytest

from scrforge.geometry import RigidTransform, Rotation
from scrforge.toyscene import default_intrinsics, make_box_room


def random_rotation(rng: np.random.Generator) -> Rotation:
    q = rng.normal(size=4)
    return Rotation(q / np.linalg.norm(q))


def random_transform(rng: np.random.Generator, t_scale: float = 2.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-t_scale, t_scale, 3))


@pytest.fixture(scope="session")
def toy_room():
    return make_box_room(n_points=200_000, seed=0)


@pytest.fixture(scope="session")
def small_room():
    return make_box_room(n_points=40_000, seed=1)


@pytest.fixture(scope="session")
def intrinsics():
    return default_intrinsics()
