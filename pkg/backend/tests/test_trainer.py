from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from src.common.exceptions import DatasetError
from src.services.commands import read_scores
from src.services.losses import anomaly_score
from src.services.model import FmuadModel
from src.services.trainer import (
    EpochLog,
    Trainer,
    make_batches,
    score_series,
    training_windows,
    write_breakdown,
    write_scores,
    write_training_log,
)
from src.services.transforms import window_view


def mean_score(model, series, ends):
    hp = model.hp
    views = [window_view(series, t, hp.tau, hp.k) for t in ends]
    return float(np.mean([anomaly_score(model.target(v), model.predict(v)) for v in views]))


def trained(tiny_hp, config, series, seed=1):
    model = FmuadModel(tiny_hp, seed=seed)
    logs = Trainer(model, config).train(series)
    return model, logs


class TestWindows:
    def test_last_window_flush_with_end(self):
        ends = training_windows(np.zeros((2, 50)), tau=24, stride=4)
        assert ends[-1] == 49
        assert ends[0] >= 23
        assert np.all(np.diff(ends) == 4)

    def test_exact_length_gives_one_window(self):
        assert training_windows(np.zeros((2, 24)), tau=24, stride=4) == [23]

    def test_shorter_than_span(self):
        with pytest.raises(DatasetError, match="shorter than the input span"):
            training_windows(np.zeros((2, 23)), tau=24, stride=4)

    def test_batches_drop_singletons(self, rng):
        batches = make_batches([1, 2, 3, 4, 5], 2, rng)
        assert len(batches) == 2
        assert all(len(b) == 2 for b in batches)
        assert len({t for b in batches for t in b}) == 4


class TestTrainer:
    def test_epoch_logs(self, tiny_hp, tiny_config, tiny_series):
        _, logs = trained(tiny_hp, tiny_config, tiny_series)
        assert [log.epoch for log in logs] == [1, 2]
        for log in logs:
            assert log.l1 > 0 and log.l2 >= 0
            assert np.isfinite(log.loss)

    def test_l1_only_reduces_forecast_error(self, tiny_hp, tiny_config, tiny_series):
        config = replace(tiny_config, loss="l1-only", epochs=4).validate()
        model = FmuadModel(tiny_hp, seed=1)
        ends = training_windows(tiny_series, 24, 4)
        before = mean_score(model, tiny_series, ends)
        logs = Trainer(model, config).train(tiny_series)
        assert mean_score(model, tiny_series, ends) < before
        assert all(log.l2 >= 0 for log in logs)

    def test_same_seed_same_run(self, tiny_hp, tiny_config, tiny_series, same_parameters):
        a, logs_a = trained(tiny_hp, tiny_config, tiny_series)
        b, logs_b = trained(tiny_hp, tiny_config, tiny_series)
        assert logs_a == logs_b
        assert same_parameters(a.parameters(), b.parameters())

    def test_training_changes_parameters(self, tiny_hp, tiny_config, tiny_series, same_parameters):
        model, _ = trained(tiny_hp, tiny_config, tiny_series)
        assert not same_parameters(model.parameters(), FmuadModel(tiny_hp, seed=1).parameters())

    def test_feature_count_checked(self, tiny_model, tiny_config, rng):
        with pytest.raises(DatasetError, match="features"):
            Trainer(tiny_model, tiny_config).train(rng.standard_normal((2, 100)))

    def test_too_few_windows_for_a_batch(self, tiny_model, tiny_config, rng):
        with pytest.raises(DatasetError, match="too few"):
            Trainer(tiny_model, tiny_config).train(rng.standard_normal((3, 24)))

    def test_training_log_file(self, tmp_path):
        logs = [EpochLog(1, 2.0, 0.5, 1.00002), EpochLog(2, 1.5, 0.25, 0.3750150)]
        path = write_training_log(logs, str(tmp_path / "log.csv"))
        frame = pd.read_csv(path, float_precision="round_trip")
        assert list(frame.columns) == ["epoch", "l1", "l2", "loss"]
        assert frame["epoch"].tolist() == [1, 2]
        assert frame["loss"].tolist() == [1.00002, 0.3750150]
        assert open(path, encoding="utf-8").read().splitlines()[1].startswith("1,2,0.5,")


class TestScoring:
    def test_one_score_per_window_end(self, tiny_model, tiny_series):
        scores, parts = score_series(tiny_model, tiny_series)
        assert len(scores.scores) == 120 - 24 + 1
        assert scores.timestamps[0] == 23 and scores.timestamps[-1] == 119
        assert np.all(scores.scores >= 0)
        assert parts == []

    def test_score_matches_direct_forecast(self, tiny_model, tiny_series):
        scores, _ = score_series(tiny_model, tiny_series)
        view = window_view(tiny_series, 50, 24, 4)
        direct = anomaly_score(tiny_model.target(view), tiny_model.predict(view))
        assert scores.scores[50 - 23] == direct

    def test_workers_do_not_change_scores(self, tiny_model, tiny_series):
        single, _ = score_series(tiny_model, tiny_series, workers=1)
        pooled, _ = score_series(tiny_model, tiny_series, workers=3)
        np.testing.assert_array_equal(single.timestamps, pooled.timestamps)
        np.testing.assert_array_equal(single.scores, pooled.scores)

    def test_breakdown_sums_to_score(self, tiny_model, tiny_series):
        scores, parts = score_series(tiny_model, tiny_series, breakdown=True)
        assert len(parts) == len(scores.scores)
        for score, part in zip(scores.scores, parts):
            assert sum(part.values()) == pytest.approx(score, rel=1e-9)

    def test_series_shorter_than_span(self, tiny_model, rng):
        with pytest.raises(DatasetError, match="shorter than the input span"):
            score_series(tiny_model, rng.standard_normal((3, 20)))

    def test_score_files(self, tiny_model, tiny_series, tmp_path):
        scores, parts = score_series(tiny_model, tiny_series, breakdown=True)
        scores_path = write_scores(scores, str(tmp_path / "s.csv"))
        lines = open(scores_path, encoding="utf-8").read().splitlines()
        assert lines[0] == "timestamp,score"
        assert lines[1].startswith(f"{tiny_model.hp.tau - 1},")
        assert float(lines[1].split(",")[1]) == scores.scores[0]
        np.testing.assert_array_equal(read_scores(scores_path).scores, scores.scores)
        path = write_breakdown(scores, parts, tiny_model.hp.detectors, str(tmp_path / "b.csv"))
        header = open(path, encoding="utf-8").readline().strip()
        assert header == "timestamp,score,correlation,temporal,spatial"
