import numpy as np
import pytest

from semattack.data import default_mixture, sample_dataset
from semattack.models import AdamState, LinearModel, TwoLayerMlp, train
from semattack.tensor_math import SeededRng
from semattack.tests.yaml_cases import YamlCasePlugin


def pytest_configure(config):
    config.pluginmanager.register(YamlCasePlugin(), name="yaml_cases")


@pytest.fixture(scope="session")
def small_dataset():
    """A 64-pixel digit mixture, small enough to train on in a second."""
    return sample_dataset(default_mixture(d=64, sigma=0.1), 600, SeededRng(3))


@pytest.fixture(scope="session")
def trained_mlp(small_dataset):
    model = TwoLayerMlp.initialize(small_dataset.d, 16, SeededRng(5))
    model, _ = train(model, small_dataset, 20, AdamState(lr=0.01), SeededRng(6))
    return model


@pytest.fixture
def linear_model():
    # Logits (x0, -x0): class +1 (index 0) whenever the first pixel is positive.
    w = np.zeros(4)
    w[0] = 1.0
    return LinearModel(w)
