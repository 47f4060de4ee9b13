"""Point-adjusted precision / recall / F1 and best-F1 threshold selection."""

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix

from src.common.exceptions import ContractViolation, require
from src.common.logger import get_logger

logger = get_logger("evaluation")


@dataclass(frozen=True)
class ScoreSeries:
    timestamps: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        if len(self.timestamps) != len(self.scores):
            raise ContractViolation(f"{len(self.timestamps)} timestamps for {len(self.scores)} scores")
        require(bool(np.all(np.asarray(self.scores) >= 0)), "anomaly scores must be non-negative")
        require(bool(np.all(np.diff(self.timestamps) > 0)), "score timestamps must be increasing")

    def __len__(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class EvalReport:
    threshold: float
    precision: float
    recall: float
    f1: float
    precision_adjusted: float
    recall_adjusted: float
    f1_adjusted: float
    tp: int
    fp: int
    fn: int

    def to_dict(self) -> dict:
        """Field values, with a non-finite threshold spelled as "inf", "-inf" or "nan" since JSON has no such numbers."""
        content = asdict(self)
        if not math.isfinite(self.threshold):
            content["threshold"] = str(self.threshold)
        return content

    def to_text(self) -> str:
        return "\n".join(f"{key}={value}" for key, value in self.to_dict().items()) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)


def _as_flags(values: Sequence) -> np.ndarray:
    return np.asarray(values).astype(bool)


def label_segments(labels: Sequence) -> List[Tuple[int, int]]:
    """Maximal runs of true labels as half-open (start, end) pairs."""
    flags = _as_flags(labels).astype(np.int8)
    edges = np.diff(np.concatenate(([0], flags, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def point_adjust(pred_flags: Sequence, labels: Sequence) -> np.ndarray:
    """Mark a whole labelled segment as detected when any point in it is flagged."""
    pred = _as_flags(pred_flags)
    if len(pred) != len(labels):
        raise ContractViolation(f"{len(pred)} predictions for {len(labels)} labels")
    adjusted = pred.copy()
    for start, end in label_segments(labels):
        if adjusted[start:end].any():
            adjusted[start:end] = True
    return adjusted


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def f1_from(precision: float, recall: float) -> float:
    return _ratio(2 * precision * recall, precision + recall)


def confusion_counts(pred_flags: Sequence, labels: Sequence) -> Tuple[int, int, int]:
    pred = _as_flags(pred_flags)
    truth = _as_flags(labels)
    if len(pred) != len(truth):
        raise ContractViolation(f"{len(pred)} predictions for {len(truth)} labels")
    if len(pred) == 0:
        return 0, 0, 0
    _, fp, fn, tp = confusion_matrix(truth, pred, labels=[False, True]).ravel()
    return int(tp), int(fp), int(fn)


def prf1(pred_flags: Sequence, labels: Sequence) -> Tuple[float, float, float]:
    tp, fp, fn = confusion_counts(pred_flags, labels)
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return precision, recall, f1_from(precision, recall)


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Every distinct score plus both infinities (flag everything / flag nothing)."""
    return np.concatenate(([-math.inf], np.unique(scores), [math.inf]))


def select_threshold(scores: ScoreSeries, labels: Sequence) -> Tuple[float, EvalReport]:
    """Best point-adjusted F1 over all candidate thresholds; ties favour the larger one."""
    values = np.asarray(scores.scores, dtype=np.float64)
    truth = _as_flags(labels)
    if len(values) == 0:
        raise ContractViolation("threshold selection needs at least one score")
    if len(values) != len(truth):
        raise ContractViolation(f"{len(values)} scores for {len(truth)} labels")

    # a segment is found at threshold th exactly when its peak score exceeds th
    segments = label_segments(truth)
    seg_peak = np.array([values[s:e].max() for s, e in segments])
    seg_len = np.array([e - s for s, e in segments])
    normal_scores = values[~truth]
    positives = int(truth.sum())

    # F1 = 2tp / (2tp + fp + fn), kept as an exact fraction for tie comparison
    best_th, best_f1 = math.inf, Fraction(-1)
    for th in candidate_thresholds(values):
        tp = int(seg_len[seg_peak > th].sum()) if len(segments) else 0
        fp = int(np.count_nonzero(normal_scores > th))
        f1 = Fraction(2 * tp, 2 * tp + fp + positives - tp) if tp else Fraction(0)
        if f1 >= best_f1:
            best_th, best_f1 = float(th), f1

    report = evaluate_at(values, truth, best_th)
    logger.debug(f"Selected threshold {best_th} with adjusted F1 {report.f1_adjusted:.4f}")
    return best_th, report


def evaluate_at(scores: Sequence[float], labels: Sequence, threshold: float) -> EvalReport:
    values = np.asarray(scores, dtype=np.float64)
    flags = values > threshold
    precision, recall, f1 = prf1(flags, labels)
    adjusted = point_adjust(flags, labels)
    tp, fp, fn = confusion_counts(adjusted, labels)
    p_adj = _ratio(tp, tp + fp)
    r_adj = _ratio(tp, tp + fn)
    return EvalReport(
        threshold=float(threshold),
        precision=precision,
        recall=recall,
        f1=f1,
        precision_adjusted=p_adj,
        recall_adjusted=r_adj,
        f1_adjusted=f1_from(p_adj, r_adj),
        tp=tp,
        fp=fp,
        fn=fn,
    )


def pooled_report(flag_groups: Sequence[Sequence], label_groups: Sequence[Sequence]) -> EvalReport:
    """Metrics over several entities' flags, each already thresholded on its own.

    Point adjustment runs per entity so segments never join across entity borders.
    """
    if len(flag_groups) != len(label_groups) or not flag_groups:
        raise ContractViolation(f"{len(flag_groups)} flag groups for {len(label_groups)} label groups")
    flags = np.concatenate([_as_flags(f) for f in flag_groups])
    truth = np.concatenate([_as_flags(lab) for lab in label_groups])
    adjusted = np.concatenate([point_adjust(f, lab) for f, lab in zip(flag_groups, label_groups)])
    precision, recall, f1 = prf1(flags, truth)
    tp, fp, fn = confusion_counts(adjusted, truth)
    p_adj = _ratio(tp, tp + fp)
    r_adj = _ratio(tp, tp + fn)
    return EvalReport(
        threshold=math.nan,
        precision=precision,
        recall=recall,
        f1=f1,
        precision_adjusted=p_adj,
        recall_adjusted=r_adj,
        f1_adjusted=f1_from(p_adj, r_adj),
        tp=tp,
        fp=fp,
        fn=fn,
    )
