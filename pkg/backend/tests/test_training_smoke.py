"""Short training runs checking that each detector actually learns."""

import numpy as np
import pytest

from src.services.losses import anomaly_score
from src.services.model import FmuadModel, ModelHyperparameters
from src.services.run_config import RunConfig
from src.services.synthetic import AnomalySegment, SyntheticSpec, generate_synthetic
from src.services.trainer import Trainer, score_series, training_windows
from src.services.transforms import window_view

pytestmark = pytest.mark.slow


def fit(series, detectors, tau, k, stride, epochs, lr=0.01, loss="l1-only", channels=(4, 4, 4)):
    config = RunConfig(
        tau=tau,
        k=k,
        stride=stride,
        batch_size=8,
        epochs=epochs,
        learning_rate=lr,
        hidden_ch=4,
        dilated_channels=channels,
        detectors=detectors,
        loss=loss,
        train_stride=5,
        seed=0,
    ).validate()
    model = FmuadModel(config.hyperparameters(series.shape[0]), seed=0)
    before = mean_error(model, series, tau)
    logs = Trainer(model, config).train(series)
    return model, before, mean_error(model, series, tau), logs


def mean_error(model, series, tau):
    ends = training_windows(series, tau, 7)
    views = [window_view(series, t, tau, model.hp.k) for t in ends]
    return float(np.mean([anomaly_score(model.target(v), model.predict(v)) for v in views]))


def waves(periods, length=1200, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    rows = [np.sin(2 * np.pi * t / p + rng.uniform(0, 2 * np.pi)) for p in periods]
    return 0.5 + 0.4 * np.stack(rows) + noise * rng.standard_normal((len(periods), length))


def test_correlation_error_drops_tenfold():
    series = waves([30, 30, 15], noise=0.02)
    _, before, after, _ = fit(series, ("correlation",), tau=70, k=30, stride=10, epochs=20, lr=0.02)
    assert after <= before / 10


def test_temporal_keeps_dominant_bin():
    series = waves([10, 15], noise=0.01)
    model, _, _, _ = fit(series, ("temporal",), tau=70, k=30, stride=10, epochs=20, lr=0.02)
    view = window_view(series, 600, 70, 30)
    pred, truth = model.predict(view), model.target(view)
    np.testing.assert_array_equal(pred.argmax(axis=1), truth.argmax(axis=1))


def test_spatial_learns_constant_history():
    series = np.full((2, 400), 0.5)
    model, _, after, _ = fit(series, ("spatial",), tau=30, k=4, stride=2, epochs=30, lr=0.01)
    assert after / model.layout.n / 2 < 1e-3


def test_joint_loss_reduces_forecast_error():
    rng = np.random.default_rng(3)
    t = np.arange(2000)
    series = 0.5 + 0.3 * np.stack([np.sin(2 * np.pi * t / 20), np.cos(2 * np.pi * t / 20), np.sin(2 * np.pi * t / 10)])
    series += 0.02 * rng.standard_normal(series.shape)
    _, _, _, logs = fit(series, ("correlation", "temporal", "spatial"), tau=40, k=8, stride=4, epochs=2, loss="full")
    assert logs[-1].l1 < logs[0].l1


def test_anomalies_score_higher_than_normal_data():
    spec = SyntheticSpec.default(m=3, train_length=3000, test_length=2000, seed=4)
    dataset = generate_synthetic(spec)
    hp = ModelHyperparameters(m=3, tau=60, k=30, stride=10, hidden_ch=4, dilated_channels=(4, 4, 4))
    model = FmuadModel(hp, seed=0, stats=dataset.normalization_stats)
    config = RunConfig(
        tau=60, k=30, stride=10, batch_size=16, epochs=3, learning_rate=0.01,
        hidden_ch=4, dilated_channels=(4, 4, 4), train_stride=15, seed=0,
    ).validate()
    Trainer(model, config).train(dataset.train.values)
    scores, _ = score_series(model, dataset.test.values, workers=2)
    labels = dataset.test_labels[scores.timestamps]
    assert np.median(scores.scores[labels]) > np.median(scores.scores[~labels])


def segment_errors(model, dataset, detector):
    """Block errors of windows ending inside a labelled segment, and of windows whose span touches none."""
    scores, parts = score_series(model, dataset.test.values, workers=2, breakdown=True)
    errors = np.array([part[detector] for part in parts])
    labels = dataset.test_labels
    inside = labels[scores.timestamps]
    touched = np.array([labels[t - model.hp.tau + 1 : t + 1].any() for t in scores.timestamps])
    return errors[inside], errors[~touched]


def test_frequency_change_raises_temporal_error():
    spec = SyntheticSpec(
        m=2, train_length=1200, test_length=900, seed=6, periods=[30.0, 15.0],
        segments=[AnomalySegment(500, 545, "frequency-change", 0)],
    )
    dataset = generate_synthetic(spec)
    model, _, _, _ = fit(dataset.train.values, ("temporal",), tau=70, k=30, stride=10, epochs=20, lr=0.02)
    inside, outside = segment_errors(model, dataset, "temporal")
    assert inside.mean() >= 2 * outside.mean()


def test_spike_raises_spatial_error():
    spec = SyntheticSpec(
        m=2, train_length=600, test_length=500, seed=7, periods=[30.0, 15.0],
        segments=[AnomalySegment(300, 302, "abrupt-value", 0)],
    )
    dataset = generate_synthetic(spec)
    model, _, _, _ = fit(dataset.train.values, ("spatial",), tau=30, k=4, stride=2, epochs=30, lr=0.01)
    inside, outside = segment_errors(model, dataset, "spatial")
    assert len(inside) == 2
    assert inside.mean() >= 5 * outside.mean()


def test_subtle_drift_raises_spatial_error():
    spec = SyntheticSpec(
        m=2, train_length=600, test_length=800, seed=8, periods=[30.0, 15.0],
        segments=[AnomalySegment(300, 500, "subtle-value", 0)],
    )
    dataset = generate_synthetic(spec)
    model, _, _, _ = fit(dataset.train.values, ("spatial",), tau=30, k=4, stride=2, epochs=30, lr=0.01)
    inside, outside = segment_errors(model, dataset, "spatial")
    assert inside.mean() >= 2 * outside.mean()
