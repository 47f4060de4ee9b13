import numpy as np
import pytest

from src.common.exceptions import DatasetError
from src.services.dataset import (
    Dataset,
    NormalizationStats,
    dataset_summary,
    load_csv_dataset,
    load_dataset_dir,
    read_labels,
    read_series_csv,
    save_csv_dataset,
    write_series_csv,
)


def write(path, text, encoding="utf-8"):
    with open(path, "w", encoding=encoding, newline="") as f:
        f.write(text)
    return str(path)


@pytest.fixture
def toy_files(tmp_path):
    train = write(tmp_path / "train.csv", "1.0,10.0,5\n2.0,20.0,5\n3.0,30.0,5\n")
    test = write(tmp_path / "test.csv", "2.0,40.0,5\n-5.0,0.0,5\n1.5,15.0,6\n")
    labels = write(tmp_path / "labels.txt", "0\n1\n0\n")
    return train, test, labels


class TestLoadCsv:
    def test_normalization_from_train_only(self, toy_files):
        ds = load_csv_dataset(*toy_files)
        assert ds.m == 3
        np.testing.assert_allclose(ds.train.values[0], [0.0, 0.5, 1.0])
        assert ds.train.values.min() >= 0.0 and ds.train.values.max() <= 1.0
        np.testing.assert_allclose(ds.test.values[0], [0.5, -1.0, 0.25])
        np.testing.assert_allclose(ds.test.values[1], [1.5, -0.5, 0.25])
        assert ds.test_labels.tolist() == [False, True, False]

    def test_constant_feature_maps_to_zero(self, toy_files):
        ds = load_csv_dataset(*toy_files)
        np.testing.assert_array_equal(ds.train.values[2], np.zeros(3))
        np.testing.assert_array_equal(ds.test.values[2], np.zeros(3))

    def test_test_values_clamped(self, toy_files):
        ds = load_csv_dataset(*toy_files)
        assert ds.test.values.min() >= -1.0 and ds.test.values.max() <= 2.0

    def test_round_trip(self, toy_files, tmp_path):
        ds = load_csv_dataset(*toy_files)
        out = tmp_path / "copy"
        save_csv_dataset(ds, str(out))
        again = load_dataset_dir(str(out))
        np.testing.assert_array_equal(again.raw_train, ds.raw_train)
        np.testing.assert_array_equal(again.raw_test, ds.raw_test)
        np.testing.assert_array_equal(again.test_labels, ds.test_labels)

    def test_written_floats_read_back_exactly(self, rng, tmp_path):
        values = np.vstack([rng.standard_normal((5, 3)), [[0.1, 1e-300, -2.5e17]]])
        path = write_series_csv(str(tmp_path / "v.csv"), values)
        again, names = read_series_csv(path)
        assert names is None
        np.testing.assert_array_equal(again, values)
        path = write_series_csv(str(tmp_path / "named.csv"), values, ["a", "b", "c"])
        again, names = read_series_csv(path)
        assert names == ["a", "b", "c"]
        np.testing.assert_array_equal(again, values)

    def test_header_row(self, tmp_path):
        values, names = read_series_csv(write(tmp_path / "h.csv", "cpu,mem\n1,2\n3,4\n"))
        assert names == ["cpu", "mem"]
        assert values.shape == (2, 2)

    def test_non_utf8_encoding(self, tmp_path):
        path = write(tmp_path / "u16.csv", "1.0,2.0\n3.0,4.0\n", encoding="utf-16")
        values, _ = read_series_csv(path)
        np.testing.assert_array_equal(values, [[1.0, 2.0], [3.0, 4.0]])

    def test_feature_count_from_file(self, tmp_path):
        row = ",".join(["0.5"] * 38)
        values, _ = read_series_csv(write(tmp_path / "smd.csv", f"{row}\n{row}\n"))
        assert values.shape[1] == 38


class TestErrors:
    def test_non_numeric_cell_reports_line(self, tmp_path):
        path = write(tmp_path / "bad.csv", "1,2\n3,x\n5,6\n")
        with pytest.raises(DatasetError, match="line 2"):
            read_series_csv(path)

    def test_ragged_rows(self, tmp_path):
        path = write(tmp_path / "ragged.csv", "1,2\n3\n5,6\n")
        with pytest.raises(DatasetError):
            read_series_csv(path)

    def test_bad_label(self, tmp_path):
        path = write(tmp_path / "labels.txt", "0\n2\n")
        with pytest.raises(DatasetError, match="line 2"):
            read_labels(path)

    def test_label_count_mismatch(self, toy_files, tmp_path):
        train, test, _ = toy_files
        labels = write(tmp_path / "short.txt", "0\n1\n")
        with pytest.raises(DatasetError, match="labels"):
            load_csv_dataset(train, test, labels)

    def test_column_mismatch(self, toy_files, tmp_path):
        train, _, labels = toy_files
        test = write(tmp_path / "narrow.csv", "1,2\n3,4\n5,6\n")
        with pytest.raises(DatasetError, match="columns"):
            load_csv_dataset(train, test, labels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="not found"):
            load_dataset_dir(str(tmp_path / "nowhere"))


def test_summary():
    ds = Dataset.from_raw(np.ones((2, 10)), np.ones((2, 6)), np.array([0, 1, 1, 0, 1, 0]))
    summary = dataset_summary(ds)
    assert summary == {"m": 2, "train_length": 10, "test_length": 6, "anomaly_ratio": 0.5, "segments": 2}


def test_stats_fit_per_feature():
    stats = NormalizationStats.fit(np.array([[0.0, 4.0], [1.0, 1.0]]))
    np.testing.assert_array_equal(stats.minimum, [0.0, 1.0])
    np.testing.assert_array_equal(stats.maximum, [4.0, 1.0])
