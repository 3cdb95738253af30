import numpy as np
import pytest

from contourvae.ingest import synth_ensemble, to_features
from contourvae.vae import TrainConfig, train


@pytest.fixture(scope="session")
def circles():
    return synth_ensemble("perturbed-circle", 95, 7)


@pytest.fixture(scope="session")
def circle_model(circles):
    """Default-configuration VAE on 95 perturbed circles (k=8, s=100)."""
    feats, norm = to_features(circles, 100)
    model, history = train(feats, TrainConfig(), norm=norm)
    return model, history, feats


@pytest.fixture(scope="session")
def tiny_model():
    """A few-second model for tests that only need some trained checkpoint."""
    ens = synth_ensemble("perturbed-circle", 20, 3)
    feats, norm = to_features(ens, 32)
    cfg = TrainConfig(epochs=200, k=2, s=32, hidden=(16, 8), seed=5)
    model, _ = train(feats, cfg, norm=norm)
    return model, ens


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
