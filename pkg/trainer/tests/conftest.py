"""Shared fixtures: small rendered datasets produced through the scrforge CLI."""

from __future__ import annotations

import pytest

from scrtrainer.toygap import (_write_render_config, make_domain_datasets,
                               run_scrforge, write_room_ply)


@pytest.fixture(scope="session")
def square_dataset(tmp_path_factory):
    """Four 96x96 labeled frames; crops of size 96 are deterministic."""
    root = tmp_path_factory.mktemp("square")
    room = write_room_ply(root / "room.ply", n_points=150_000, seed=3)
    cfg = _write_render_config(root / "cfg.toml", 0.02, 96, 96, 80.0)
    run_scrforge("render", "--cloud", room, "--n", 4, "--out", root / "ds",
                 "--seed", 5, "--config", cfg)
    return root / "ds" / "manifest.jsonl"


@pytest.fixture(scope="session")
def tiny_domain(tmp_path_factory):
    """A miniature two-domain dataset (few frames) for translation tests."""
    root = tmp_path_factory.mktemp("domain")
    return make_domain_datasets(root, train_frames=8, test_frames=2,
                                probe_frames=2, seed=7)
