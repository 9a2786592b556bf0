import numpy as np
import pytest

from salflow.core import ComplementedSequence, Layout
from salflow.synth import render, static_scene_spec, translation_scene_spec


def random_sequence(rng, n_frames=3, height=8, width=8, layout='gray'):
    layout = Layout.parse(layout)
    data = rng.uniform(0, 1, size=(n_frames, height, width, layout.channels))
    return ComplementedSequence(data, layout)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope='module')
def static_scene():
    return render(static_scene_spec(size=32, n_frames=3, seed=1))


@pytest.fixture(scope='module')
def translation_scene():
    return render(translation_scene_spec(size=32, n_frames=4))
