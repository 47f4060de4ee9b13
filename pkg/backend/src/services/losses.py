"""Batch forecasting loss, compactness loss, their product, and the per-window score."""

from typing import Dict, Sequence, Union

import numpy as np

from config.config import get_parameter
from src.common.autodiff import Tensor, add, add_scalar, hadamard, mul_scalar, scale, sub, sum_all
from src.common.exceptions import ContractViolation, require
from src.services.transforms import TargetLayout

EPSILON = float(get_parameter("loss.epsilon", 1e-5))

Matrix = Union[np.ndarray, Tensor]


def _tensor(x: Matrix) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class BatchForecast:
    def __init__(self, truths: Sequence[Matrix], predictions: Sequence[Matrix]) -> None:
        if len(truths) != len(predictions):
            raise ContractViolation(f"{len(truths)} targets for {len(predictions)} predictions")
        require(len(truths) >= 1, "batch must not be empty")
        self.truths = [_tensor(t) for t in truths]
        self.predictions = [_tensor(p) for p in predictions]
        shape = self.truths[0].shape
        for y, y_hat in zip(self.truths, self.predictions):
            if y.shape != shape or y_hat.shape != shape:
                raise ContractViolation(
                    f"batch shapes must be uniform: {list(y.shape)} / {list(y_hat.shape)} vs {list(shape)}"
                )

    @property
    def size(self) -> int:
        return len(self.truths)

    @property
    def columns(self) -> int:
        return self.truths[0].shape[-1]


def squared_error(y: Tensor, y_hat: Tensor) -> Tensor:
    diff = sub(y, y_hat)
    return sum_all(hadamard(diff, diff))


def forecast_loss(batch: BatchForecast) -> Tensor:
    """Mean over the batch of the squared Frobenius forecast error."""
    total = None
    for y, y_hat in zip(batch.truths, batch.predictions):
        err = squared_error(y, y_hat)
        total = err if total is None else add(total, err)
    return scale(total, 1.0 / batch.size)


def compactness_loss(batch: BatchForecast) -> Tensor:
    """Leave-one-out spread of the predictions, normalised by n * b."""
    b = batch.size
    if b < 2:
        raise ContractViolation(f"compactness loss needs a batch of at least 2, got {b}")
    preds = batch.predictions
    total = preds[0]
    for p in preds[1:]:
        total = add(total, p)
    others_mean = 1.0 / (b - 1)
    acc = None
    for p in preds:
        # p - (total - p) / (b - 1)
        z = sub(scale(p, 1.0 + others_mean), scale(total, others_mean))
        zz = sum_all(hadamard(z, z))
        acc = zz if acc is None else add(acc, zz)
    return scale(acc, 1.0 / (batch.columns * b))


def training_loss(l1: Tensor, l2: Tensor, epsilon: float = EPSILON) -> Tensor:
    if l1.item() < 0 or l2.item() < 0:
        raise ContractViolation("loss terms must be non-negative")
    return mul_scalar(l1, add_scalar(l2, epsilon))


def anomaly_score(truth: Matrix, pred: Matrix) -> float:
    """Squared Frobenius forecast error of a single window."""
    return forecast_loss(BatchForecast([truth], [pred])).item()


def score_breakdown(truth: np.ndarray, pred: np.ndarray, layout: TargetLayout) -> Dict[str, float]:
    """Split a window's score into the contribution of each detector block."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape:
        raise ContractViolation(f"score shapes differ: {list(truth.shape)} vs {list(pred.shape)}")
    out = {}
    for detector in layout.enabled:
        cols = layout.columns(detector)
        diff = truth[:, cols] - pred[:, cols]
        out[detector] = float(np.sum(diff * diff))
    return out
