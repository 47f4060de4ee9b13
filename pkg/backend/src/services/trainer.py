"""Joint training of the enabled detectors and stride-1 scoring of a series."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from cache.cache_manager import CacheManager
from src.common.autodiff import Tape, backward
from src.common.exceptions import DatasetError
from src.common.logger import get_logger
from src.common.optimizer import OptimizerState, optimizer_step
from src.common.utils import timed_block, timed_method
from src.services.dataset import write_frame_csv
from src.services.evaluation import ScoreSeries
from src.services.losses import (
    BatchForecast,
    anomaly_score,
    compactness_loss,
    forecast_loss,
    score_breakdown,
    training_loss,
)
from src.services.model import FmuadModel
from src.services.run_config import RunConfig
from src.services.transforms import BLOCK_ORDER, window_view

logger = get_logger("trainer")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    l1: float
    l2: float
    loss: float


def _check_length(series: np.ndarray, tau: int, what: str) -> None:
    if series.shape[1] < tau:
        raise DatasetError(f"{what} series has {series.shape[1]} steps, shorter than the input span tau={tau}")


def training_windows(series: np.ndarray, tau: int, stride: int) -> List[int]:
    """End indices of training windows, the last one flush with the series end."""
    _check_length(series, tau, "training")
    return list(range(series.shape[1] - 1, tau - 2, -stride))[::-1]


def make_batches(ends: List[int], batch_size: int, rng: np.random.Generator) -> List[List[int]]:
    order = rng.permutation(len(ends))
    batches = [[ends[i] for i in order[s : s + batch_size]] for s in range(0, len(order), batch_size)]
    # the compactness term needs two forecasts
    return [b for b in batches if len(b) >= 2]


def write_training_log(logs: List[EpochLog], file_path: str) -> str:
    frame = pd.DataFrame([asdict(log) for log in logs], columns=["epoch", "l1", "l2", "loss"])
    return write_frame_csv(file_path, frame)


class Trainer:
    def __init__(self, model: FmuadModel, config: RunConfig) -> None:
        self.model = model
        self.config = config
        self.state = OptimizerState.from_config(config.learning_rate)
        self.rng = np.random.default_rng(config.seed)

    def _step(self, series: np.ndarray, batch: List[int]) -> Tuple[float, float, float]:
        hp = self.model.hp
        with Tape() as tape:
            params = tape.watch_all(self.model.parameters())
            truths, preds = [], []
            for t in batch:
                view = window_view(series, t, hp.tau, hp.k)
                truths.append(self.model.target(view))
                preds.append(self.model.forecast(view, params))
            forecast = BatchForecast(truths, preds)
            l1 = forecast_loss(forecast)
            l2 = compactness_loss(forecast)
            loss = training_loss(l1, l2)
            objective = l1 if self.config.loss == "l1-only" else loss
        backward(objective, tape)
        grads = {name: tape.gradient(p) for name, p in params.items()}
        updated, self.state = optimizer_step(self.model.parameters(), grads, self.state)
        self.model.load_parameters(updated)
        return l1.item(), l2.item(), loss.item()

    def train_epoch(self, series: np.ndarray, epoch: int) -> EpochLog:
        ends = training_windows(series, self.model.hp.tau, self.config.effective_train_stride())
        batches = make_batches(ends, self.config.batch_size, self.rng)
        if not batches:
            raise DatasetError(
                f"training series of {series.shape[1]} steps yields {len(ends)} windows, too few for a batch of 2"
            )
        totals = np.zeros(3)
        with timed_block(f"epoch {epoch}"):
            for batch in batches:
                totals += self._step(series, batch)
        l1, l2, loss = totals / len(batches)
        log = EpochLog(epoch, float(l1), float(l2), float(loss))
        logger.info(f"Epoch {epoch}: l1={log.l1:.6f} l2={log.l2:.6f} loss={log.loss:.6f} ({len(batches)} batches)")
        return log

    def train(self, series: np.ndarray, epochs: Optional[int] = None) -> List[EpochLog]:
        _check_length(series, self.model.hp.tau, "training")
        if series.shape[0] != self.model.hp.m:
            raise DatasetError(f"model expects {self.model.hp.m} features, training series has {series.shape[0]}")
        epochs = epochs or self.config.epochs
        logger.info(
            f"Training detectors {list(self.model.hp.detectors)} for {epochs} epochs "
            f"(loss={self.config.loss}, batch={self.config.batch_size}, lr={self.config.learning_rate})"
        )
        return [self.train_epoch(series, epoch) for epoch in range(1, epochs + 1)]


def _score_chunk(model: FmuadModel, series: np.ndarray, ends: List[int], breakdown: bool):
    cache = CacheManager()
    hp = model.hp
    scores, parts = [], []
    for t in ends:
        view = window_view(series, t, hp.tau, hp.k)
        truth = model.target(view)
        pred = model.predict(view, cache)
        scores.append(anomaly_score(truth, pred))
        if breakdown:
            parts.append(score_breakdown(truth, pred, hp.layout))
    logger.debug(f"Scored windows {ends[0]}..{ends[-1]}, cache {cache.stats}")
    return scores, parts


@timed_method
def score_series(
    model: FmuadModel, series: np.ndarray, workers: int = 1, breakdown: bool = False
) -> Tuple[ScoreSeries, List[Dict[str, float]]]:
    """One score per window end t in [tau - 1, T - 1], in timestamp order."""
    hp = model.hp
    _check_length(series, hp.tau, "scoring")
    if series.shape[0] != hp.m:
        raise DatasetError(f"checkpoint expects {hp.m} features, series has {series.shape[0]}")
    ends = list(range(hp.tau - 1, series.shape[1]))
    workers = max(1, min(workers, len(ends)))
    chunks = [list(c) for c in np.array_split(np.asarray(ends), workers) if len(c)]
    chunks = [[int(t) for t in c] for c in chunks]

    if workers == 1:
        results = [_score_chunk(model, series, chunks[0], breakdown)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _score_chunk(model, series, c, breakdown), chunks))

    scores = [s for chunk_scores, _ in results for s in chunk_scores]
    parts = [p for _, chunk_parts in results for p in chunk_parts]
    logger.info(f"Scored {len(scores)} windows with {workers} worker(s)")
    return ScoreSeries(np.asarray(ends), np.asarray(scores)), parts


def write_scores(scores: ScoreSeries, file_path: str) -> str:
    frame = pd.DataFrame({"timestamp": np.asarray(scores.timestamps, dtype=np.int64), "score": scores.scores})
    return write_frame_csv(file_path, frame)


def write_breakdown(scores: ScoreSeries, parts: List[Dict[str, float]], detectors, file_path: str) -> str:
    columns = [d for d in BLOCK_ORDER if d in detectors]
    frame = pd.DataFrame({"timestamp": np.asarray(scores.timestamps, dtype=np.int64), "score": scores.scores})
    for d in columns:
        frame[d] = [part[d] for part in parts]
    return write_frame_csv(file_path, frame)


def default_checkpoint_path(output_dir: str) -> str:
    return os.path.join(output_dir, "model.fmud")
