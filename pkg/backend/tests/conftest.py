import os
import sys

import numpy as np
import pytest

BACKEND_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if BACKEND_ROOT not in sys.path:
    sys.path.insert(0, BACKEND_ROOT)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_series(rng):
    """3 features x 120 steps of smooth noisy waves."""
    t = np.arange(120)
    base = np.stack([np.sin(2 * np.pi * t / 12), np.cos(2 * np.pi * t / 8), np.sin(2 * np.pi * t / 6)])
    return base + 0.05 * rng.standard_normal(base.shape)


@pytest.fixture
def tiny_hp():
    from src.services.model import ModelHyperparameters

    return ModelHyperparameters(m=3, tau=24, k=4, stride=2, hidden_ch=2, dilated_channels=(2, 3, 4))


@pytest.fixture
def tiny_model(tiny_hp):
    from src.services.model import FmuadModel

    return FmuadModel(tiny_hp, seed=1)


@pytest.fixture
def tiny_config():
    from src.services.run_config import RunConfig

    return RunConfig(
        tau=24,
        k=4,
        stride=2,
        batch_size=4,
        epochs=2,
        learning_rate=0.01,
        hidden_ch=2,
        dilated_channels=(2, 3, 4),
        train_stride=4,
        seed=5,
    ).validate()


@pytest.fixture
def same_parameters():
    """Exact equality of two name -> tensor parameter maps."""

    def check(a, b):
        return a.keys() == b.keys() and all(np.array_equal(a[k].data, b[k].data) for k in a)

    return check
