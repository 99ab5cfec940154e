"""Shared fixtures: one small synthetic scene and its on-disk bundle."""

import pytest

from georeg import pipeline
from georeg.synth import SceneSpec, generate_scene


@pytest.fixture(scope="session")
def small_scene():
    spec = SceneSpec(extent=200.0, n_buildings=6, n_trees=3, seed=3)
    return generate_scene(spec)


@pytest.fixture(scope="session")
def scene_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    pipeline.run_synth(
        out, spec=SceneSpec(extent=180.0, n_buildings=7, n_trees=2, seed=5)
    )
    return out
