import numpy as np
import pytest

from emgauth.dataset import SynthSpec, synth_dataset


@pytest.fixture(scope="session")
def tiny_dataset():
    """Small but separable dataset shared by evaluation-level tests."""
    spec = SynthSpec(users=3, gestures=2, trials=3, channels=2,
                     duration_s=1.0, seed=7, separation=5.0)
    return synth_dataset(spec)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
