import io
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from config.config import get_parameter
from src.common.exceptions import DatasetError
from src.common.logger import get_logger
from src.common.utils import create_folder_if_not_exists, read_text_file, write_text_file
from src.services.evaluation import label_segments
from src.services.transforms import SeriesMatrix

logger = get_logger("dataset")

TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
LABELS_FILE = "labels.txt"
CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class NormalizationStats:
    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "NormalizationStats":
        """Per-feature range of an m x T matrix."""
        return cls(minimum=values.min(axis=1), maximum=values.max(axis=1))

    @property
    def m(self) -> int:
        return len(self.minimum)

    def apply(self, values: np.ndarray, clip: Optional[Tuple[float, float]] = None) -> np.ndarray:
        if values.shape[0] != self.m:
            raise DatasetError(f"normalization stats cover {self.m} features, series has {values.shape[0]}")
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        out = (values - self.minimum[:, None]) / safe[:, None]
        # constant training features map to 0
        out[span <= 0, :] = 0.0
        if clip is not None:
            out = np.clip(out, clip[0], clip[1])
        return out


def clip_range() -> Tuple[float, float]:
    return float(get_parameter("dataset.test_clip_min")), float(get_parameter("dataset.test_clip_max"))


@dataclass(frozen=True)
class Dataset:
    train: SeriesMatrix
    test: SeriesMatrix
    test_labels: np.ndarray
    normalization_stats: NormalizationStats
    raw_train: Optional[np.ndarray] = None
    raw_test: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return self.train.m

    @classmethod
    def from_raw(
        cls,
        raw_train: np.ndarray,
        raw_test: np.ndarray,
        labels: np.ndarray,
        feature_names: Optional[List[str]] = None,
    ) -> "Dataset":
        """Build a dataset from m x T raw matrices, fitting normalization on train only."""
        if raw_train.shape[0] != raw_test.shape[0]:
            raise DatasetError(f"train has {raw_train.shape[0]} features, test has {raw_test.shape[0]}")
        if len(labels) != raw_test.shape[1]:
            raise DatasetError(f"{len(labels)} labels for {raw_test.shape[1]} test rows")
        stats = NormalizationStats.fit(raw_train)
        return cls(
            train=SeriesMatrix(stats.apply(raw_train), feature_names),
            test=SeriesMatrix(stats.apply(raw_test, clip=clip_range()), feature_names),
            test_labels=np.asarray(labels, dtype=bool),
            normalization_stats=stats,
            raw_train=raw_train,
            raw_test=raw_test,
        )


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_series_csv(file_path: str) -> Tuple[np.ndarray, Optional[List[str]]]:
    """Rows are time steps, columns are features. Returns a T x m matrix and header names."""
    text = read_text_file(file_path)
    if not text.strip():
        raise DatasetError("file is empty", file_path)

    first_line = text.lstrip().splitlines()[0]
    has_header = not all(_looks_numeric(c.strip()) for c in first_line.split(",") if c.strip())
    offset = 2 if has_header else 1

    try:
        frame = pd.read_csv(
            io.StringIO(text),
            header=0 if has_header else None,
            dtype=str,
            skip_blank_lines=True,
            keep_default_na=False,
        )
    except pd.errors.ParserError as e:
        logger.error(f"Failed to parse series file: {file_path}", e)
        raise DatasetError(f"ragged rows: {e}", file_path)

    if frame.empty:
        raise DatasetError("no data rows", file_path)

    values = np.empty(frame.shape, dtype=np.float64)
    for col_idx, column in enumerate(frame.columns):
        cells = frame[column].str.strip()
        numeric = pd.to_numeric(cells, errors="coerce")
        bad = numeric.isna() | ~np.isfinite(numeric.fillna(0.0))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            cell = cells.iloc[row]
            problem = "missing value" if pd.isna(cell) or cell == "" else f"non-numeric value '{cell}'"
            raise DatasetError(f"{problem} in column {col_idx + 1}", file_path, row + offset)
        # python float parsing reads %.17g output back exactly
        values[:, col_idx] = [float(c) for c in cells]

    names = [str(c).strip() for c in frame.columns] if has_header else None
    return values, names


def write_frame_csv(file_path: str, frame: pd.DataFrame, header: bool = True) -> str:
    """Write a frame without its index; %.17g floats read back bit-for-bit."""
    text = frame.to_csv(index=False, header=header, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return write_text_file(file_path, text)


def write_series_csv(file_path: str, values: np.ndarray, feature_names: Optional[List[str]] = None) -> str:
    """Write a T x m matrix, with a header row only when feature names are known."""
    frame = pd.DataFrame(np.asarray(values, dtype=np.float64), columns=feature_names or None)
    return write_frame_csv(file_path, frame, header=bool(feature_names))


def read_labels(file_path: str) -> np.ndarray:
    text = read_text_file(file_path)
    labels = []
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    for line_no, line in enumerate(lines, start=1):
        token = line.strip()
        if token not in ("0", "1", "0.0", "1.0"):
            raise DatasetError(f"label must be 0 or 1, got '{token}'", file_path, line_no)
        labels.append(token.startswith("1"))
    return np.asarray(labels, dtype=bool)


def write_labels(file_path: str, labels: np.ndarray) -> str:
    return write_text_file(file_path, "".join("1\n" if x else "0\n" for x in labels))


def load_csv_dataset(train_path: str, test_path: str, labels_path: str) -> Dataset:
    for p in (train_path, test_path, labels_path):
        if not os.path.isfile(p):
            raise DatasetError("file not found", p)

    train, train_names = read_series_csv(train_path)
    test, _ = read_series_csv(test_path)
    labels = read_labels(labels_path)

    if train.shape[1] != test.shape[1]:
        raise DatasetError(
            f"train has {train.shape[1]} columns but test has {test.shape[1]}", test_path
        )
    if len(labels) != test.shape[0]:
        raise DatasetError(f"{len(labels)} labels for {test.shape[0]} test rows", labels_path)

    dataset = Dataset.from_raw(train.T, test.T, labels, train_names)
    logger.info(f"Loaded dataset: {dataset_summary(dataset)}")
    return dataset


def load_dataset_dir(data_dir: str) -> Dataset:
    return load_csv_dataset(
        os.path.join(data_dir, TRAIN_FILE),
        os.path.join(data_dir, TEST_FILE),
        os.path.join(data_dir, LABELS_FILE),
    )


def save_csv_dataset(dataset: Dataset, out_dir: str) -> List[str]:
    """Write the raw series in the ingestion format (train.csv, test.csv, labels.txt)."""
    create_folder_if_not_exists(out_dir, "dataset")
    raw_train = dataset.raw_train if dataset.raw_train is not None else dataset.train.values
    raw_test = dataset.raw_test if dataset.raw_test is not None else dataset.test.values
    names = dataset.train.feature_names
    return [
        write_series_csv(os.path.join(out_dir, TRAIN_FILE), raw_train.T, names),
        write_series_csv(os.path.join(out_dir, TEST_FILE), raw_test.T, names),
        write_labels(os.path.join(out_dir, LABELS_FILE), dataset.test_labels),
    ]


def dataset_summary(dataset: Dataset) -> dict:
    labels = dataset.test_labels
    return {
        "m": dataset.m,
        "train_length": dataset.train.length,
        "test_length": dataset.test.length,
        "anomaly_ratio": float(labels.mean()) if len(labels) else 0.0,
        "segments": len(label_segments(labels)),
    }
