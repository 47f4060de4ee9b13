import numpy as np
import pytest

from src.common.exceptions import ContractViolation
from src.services.synthetic import (
    DRIFT_SIGMAS,
    KINDS,
    SPIKE_SIGMAS,
    AnomalySegment,
    Coupling,
    SyntheticSpec,
    generate_synthetic,
)
from src.services.transforms import frequency_matrix, signature_matrix


def small_spec(segments=(), couplings=(), m=2, test_length=2000):
    return SyntheticSpec(
        m=m,
        train_length=1000,
        test_length=test_length,
        seed=3,
        segments=list(segments),
        couplings=list(couplings),
    )


def test_no_segments_means_no_labels():
    ds = generate_synthetic(small_spec())
    assert not ds.test_labels.any()
    assert ds.train.length == 1000 and ds.test.length == 2000


def test_same_seed_is_bitwise_reproducible():
    spec = SyntheticSpec.default(m=3, train_length=3000, test_length=2000, seed=5)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    np.testing.assert_array_equal(a.raw_train, b.raw_train)
    np.testing.assert_array_equal(a.raw_test, b.raw_test)
    np.testing.assert_array_equal(a.test_labels, b.test_labels)


def test_default_spec_covers_all_kinds_within_ratio():
    spec = SyntheticSpec.default(m=5, train_length=2000, test_length=5000, seed=1)
    ds = generate_synthetic(spec)
    assert {s.kind for s in spec.segments} == set(KINDS)
    assert 0.01 <= ds.test_labels.mean() <= 0.15
    for seg in spec.segments:
        assert ds.test_labels[seg.start : seg.end].all()


def test_kinds_restrict_layout():
    spec = SyntheticSpec.default(m=5, train_length=2000, test_length=5000, seed=1, kinds=("frequency-change",))
    assert {s.kind for s in spec.segments} == {"frequency-change"}
    assert all(s.end - s.start >= 30 for s in spec.segments)


def test_overlapping_segments_rejected():
    spec = small_spec([AnomalySegment(100, 150, "abrupt-value", 0), AnomalySegment(140, 160, "subtle-value", 1)])
    with pytest.raises(ContractViolation):
        generate_synthetic(spec)


def test_ratio_bounds_enforced():
    spec = small_spec([AnomalySegment(100, 900, "subtle-value", 0)])
    with pytest.raises(ContractViolation):
        generate_synthetic(spec)


def test_unknown_kind():
    with pytest.raises(ContractViolation):
        AnomalySegment(0, 5, "level-shift", 0)


def test_spec_dict_round_trip():
    spec = SyntheticSpec.default(m=3, train_length=2000, test_length=2000, seed=2)
    again = SyntheticSpec.from_dict(spec.to_dict())
    assert again == spec


def test_correlation_change_flips_cosine_sign():
    seg = AnomalySegment(1000, 1100, "correlation-change", 1)
    ds = generate_synthetic(small_spec([seg], [Coupling(0, 1, 1.0)]))
    raw = ds.raw_test
    assert signature_matrix(raw[:, 900:930])[0, 1] > 0.9
    assert signature_matrix(raw[:, 1040:1070])[0, 1] < -0.9


def test_frequency_change_doubles_dominant_bin():
    seg = AnomalySegment(1000, 1100, "frequency-change", 0)
    ds = generate_synthetic(small_spec([seg]))
    raw = ds.raw_test
    outside = int(np.argmax(frequency_matrix(raw[:1, 900:930])[0])) + 1
    inside = int(np.argmax(frequency_matrix(raw[:1, 1040:1070])[0])) + 1
    assert inside == 2 * outside


def test_value_anomalies_match_their_magnitudes():
    spike = AnomalySegment(500, 503, "abrupt-value", 0)
    drift = AnomalySegment(1200, 1260, "subtle-value", 1)
    clean = generate_synthetic(small_spec())
    ds = generate_synthetic(small_spec([spike, drift]))
    sigma = clean.raw_train.std(axis=1)
    diff = ds.raw_test - clean.raw_test

    np.testing.assert_allclose(np.abs(diff[0, 500:503]), SPIKE_SIGMAS * sigma[0])
    assert abs(diff[1, 1259]) == pytest.approx(DRIFT_SIGMAS * sigma[1])
    outside = np.ones(2000, dtype=bool)
    outside[500:503] = outside[1200:1260] = False
    np.testing.assert_array_equal(diff[:, outside], 0.0)
    np.testing.assert_array_equal(ds.raw_train, clean.raw_train)
