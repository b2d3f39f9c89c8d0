import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from pawkit import pawsim, pipeline


@pytest.fixture(scope="session")
def terrain_samples():
    """Full 47-clips-per-class corpus, shared across the session."""
    return pawsim.generate_terrain_dataset(47, seed=0)


@pytest.fixture(scope="session")
def terrain_xy(terrain_samples):
    return pipeline.terrain_features(terrain_samples, pawsim.TERRAIN_CLASSES)


@pytest.fixture(scope="session")
def small_force_samples():
    return pawsim.generate_force_dataset(60, pawsim.SimConfig(seed=2))


@pytest.fixture(scope="session")
def force_samples_4000():
    return pawsim.generate_force_dataset(4000, pawsim.SimConfig(seed=0))
