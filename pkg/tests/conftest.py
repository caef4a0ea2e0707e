"""Shared fixtures: small generated scenes reused across test modules."""

import pytest

from motionstack.synth_scenes import SceneConfig, generate


@pytest.fixture(scope="session")
def scene12(tmp_path_factory):
    """A 12-frame two-blob scene with no id switches."""
    out = tmp_path_factory.mktemp("scene12")
    config = SceneConfig(num_frames=12, num_objects=2, seed=7)
    generate(config, out)
    return out


@pytest.fixture(scope="session")
def short_fragment_scene(tmp_path_factory):
    """60 frames, 4 objects; the switch at frame 50 leaves a 10-frame fragment."""
    out = tmp_path_factory.mktemp("short_fragment")
    config = SceneConfig(
        width=128,
        height=96,
        num_frames=60,
        num_objects=4,
        id_switch_events=((3, 50), (0, 20)),
        seed=19,
    )
    generate(config, out)
    return out


@pytest.fixture(scope="session")
def reid_scene(tmp_path_factory):
    """6 objects, 3 injected id switches, every fragment at least 16 frames."""
    out = tmp_path_factory.mktemp("reid_scene")
    config = SceneConfig(
        width=160,
        height=120,
        num_frames=80,
        num_objects=6,
        id_switch_events=((0, 40), (1, 42), (2, 44)),
        seed=11,
    )
    generate(config, out)
    return out
