from dataclasses import replace

import numpy as np
import pytest

from rigdepth import make_ring_rig, preset_scene, render


@pytest.fixture(scope="session")
def ring_rig():
    # 6 outward cameras, 90 deg FOV at 60 deg spacing -> 30 deg adjacent
    # overlap; compact 0.4 m ring keeps disocclusion bands thin.
    return make_ring_rig(6, 90.0, 0.4, 1.5)


@pytest.fixture(scope="session")
def plane_scene(ring_rig):
    return replace(preset_scene("plane"), rig=ring_rig)


@pytest.fixture(scope="session")
def plane_bundle(plane_scene):
    return render(plane_scene)


@pytest.fixture(scope="session")
def boxtown_scene(ring_rig):
    return replace(preset_scene("boxtown"), rig=ring_rig)


@pytest.fixture(scope="session")
def boxtown_bundle(boxtown_scene):
    return render(boxtown_scene)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
