"""The synth / train / score / eval / ablate workflows behind the CLI."""

import io
import os
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from src.common.exceptions import ConfigError, DatasetError
from src.common.logger import get_logger
from src.common.utils import create_folder_if_not_exists, read_text_file, save_to_json, write_text_file
from src.services.checkpoint import save_checkpoint
from src.services.dataset import (
    LABELS_FILE,
    TEST_FILE,
    Dataset,
    clip_range,
    dataset_summary,
    load_dataset_dir,
    read_labels,
    read_series_csv,
    save_csv_dataset,
)
from src.services.evaluation import EvalReport, ScoreSeries, pooled_report, select_threshold
from src.services.model import FmuadModel
from src.services.run_config import RunConfig
from src.services.synthetic import SyntheticSpec, generate_synthetic
from src.services.trainer import (
    Trainer,
    default_checkpoint_path,
    score_series,
    write_breakdown,
    write_scores,
    write_training_log,
)
from src.services.transforms import BLOCK_ORDER

logger = get_logger("commands")

SPEC_ECHO_FILE = "spec.yaml"
SCORES_FILE = "scores.csv"
REPORT_PREFIX = "report"
ABLATION_VARIANTS = {
    "correlation": ("correlation",),
    "temporal": ("temporal",),
    "spatial": ("spatial",),
    "all": BLOCK_ORDER,
}


def cmd_synth(
    out_dir: str,
    spec: Optional[SyntheticSpec] = None,
    spec_path: Optional[str] = None,
    **default_args,
) -> List[str]:
    """Generate a synthetic dataset and echo the spec that produced it."""
    if spec is None and spec_path:
        try:
            spec = SyntheticSpec.from_dict(yaml.safe_load(read_text_file(spec_path)) or {})
        except (TypeError, yaml.YAMLError) as e:
            raise DatasetError(f"invalid synthetic spec: {e}", spec_path)
    if spec is None:
        spec = SyntheticSpec.default(**{k: v for k, v in default_args.items() if v is not None})
    dataset = generate_synthetic(spec)
    written = save_csv_dataset(dataset, out_dir)
    written.append(
        write_text_file(os.path.join(out_dir, SPEC_ECHO_FILE), yaml.safe_dump(spec.to_dict(), sort_keys=False))
    )
    logger.info(f"Wrote synthetic dataset to {out_dir}: {dataset_summary(dataset)}")
    return written


def cmd_train(
    config: RunConfig,
    dataset: Optional[Dataset] = None,
    checkpoint_path: Optional[str] = None,
    log_path: Optional[str] = None,
) -> FmuadModel:
    if dataset is None:
        if not config.data_dir:
            raise DatasetError("no dataset given, set data_dir")
        dataset = load_dataset_dir(config.data_dir)
    logger.info(f"Training on {dataset_summary(dataset)}")
    hp = config.hyperparameters(dataset.m)
    model = FmuadModel(hp, seed=config.seed, stats=dataset.normalization_stats)
    logs = Trainer(model, config).train(dataset.train.values)

    checkpoint_path = checkpoint_path or default_checkpoint_path(config.output_dir)
    log_path = log_path or os.path.join(config.output_dir, "training_log.csv")
    save_checkpoint(model, checkpoint_path)
    write_training_log(logs, log_path)
    return model


def normalized_series(model: FmuadModel, raw: np.ndarray, source: str = None) -> np.ndarray:
    """Apply the checkpoint's training range to an m x T raw series."""
    if raw.shape[0] != model.hp.m:
        raise DatasetError(
            f"checkpoint was trained on {model.hp.m} features but the series has {raw.shape[0]}", source
        )
    if model.stats is None:
        return raw
    return model.stats.apply(raw, clip=clip_range())


def cmd_score(
    model: FmuadModel,
    test_path: str,
    out_path: str,
    workers: int = 1,
    breakdown_path: Optional[str] = None,
) -> ScoreSeries:
    if os.path.isdir(test_path):
        test_path = os.path.join(test_path, TEST_FILE)
    raw, _ = read_series_csv(test_path)
    series = normalized_series(model, raw.T, test_path)
    scores, parts = score_series(model, series, workers=workers, breakdown=breakdown_path is not None)
    write_scores(scores, out_path)
    if breakdown_path:
        write_breakdown(scores, parts, model.hp.detectors, breakdown_path)
    logger.info(f"Wrote {len(scores)} scores to {out_path}")
    return scores


def read_scores(file_path: str) -> ScoreSeries:
    text = read_text_file(file_path)
    try:
        frame = pd.read_csv(io.StringIO(text), float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Failed to parse scores file: {file_path}", e)
        raise DatasetError(f"cannot parse scores: {e}", file_path)
    if list(frame.columns[:2]) != ["timestamp", "score"]:
        raise DatasetError("scores file must start with the header 'timestamp,score'", file_path, 1)
    bad = frame["timestamp"].isna() | frame["score"].isna()
    if bad.any():
        raise DatasetError("missing value", file_path, int(np.flatnonzero(bad.to_numpy())[0]) + 2)
    try:
        timestamps = frame["timestamp"].to_numpy(dtype=np.int64)
        scores = frame["score"].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DatasetError(f"non-numeric entry: {e}", file_path)
    return ScoreSeries(timestamps, scores)


def align_labels(scores: ScoreSeries, labels: np.ndarray, source: str = None) -> np.ndarray:
    """Labels at the scored timestamps; the unscored prefix is dropped."""
    if len(scores) == 0:
        raise DatasetError("scores file has no rows", source)
    if scores.timestamps[0] < 0 or scores.timestamps[-1] >= len(labels):
        raise DatasetError(
            f"scores cover timestamps {int(scores.timestamps[0])}..{int(scores.timestamps[-1])} "
            f"but only {len(labels)} labels were given",
            source,
        )
    return np.asarray(labels, dtype=bool)[scores.timestamps]


def _write_report(report: EvalReport, out_prefix: str) -> List[str]:
    """Both report formats: <out_prefix>.txt with key=value lines and <out_prefix>.json."""
    return [
        write_text_file(f"{out_prefix}.txt", report.to_text()),
        write_text_file(f"{out_prefix}.json", report.to_json() + "\n"),
    ]


def cmd_eval(scores_path: str, labels_path: str, out_prefix: Optional[str] = None) -> EvalReport:
    """Best-F1 report for one scores file; without a prefix it lands next to the scores as report.txt/.json."""
    scores = read_scores(scores_path)
    labels = align_labels(scores, read_labels(labels_path), labels_path)
    _, report = select_threshold(scores, labels)
    _write_report(report, out_prefix or os.path.join(os.path.dirname(scores_path), REPORT_PREFIX))
    logger.info(
        f"Threshold {report.threshold}: F1={report.f1:.4f} adjusted F1={report.f1_adjusted:.4f} "
        f"(P={report.precision_adjusted:.4f}, R={report.recall_adjusted:.4f})"
    )
    return report


def cmd_eval_entities(entities_dir: str, out_prefix: Optional[str] = None) -> Tuple[Dict[str, EvalReport], EvalReport]:
    """Per-entity best-F1 reports and the pooled report over all entities.

    The pooled report goes to <out_prefix>.txt/.json and the per-entity ones to
    <out_prefix>_entities.json; the prefix defaults to <entities_dir>/report.
    """
    if not os.path.isdir(entities_dir):
        raise DatasetError("entities directory not found", entities_dir)
    names = sorted(
        name
        for name in os.listdir(entities_dir)
        if os.path.isfile(os.path.join(entities_dir, name, SCORES_FILE))
    )
    if not names:
        raise DatasetError(f"no <entity>/{SCORES_FILE} found", entities_dir)

    reports, flag_groups, label_groups = {}, [], []
    for name in names:
        scores = read_scores(os.path.join(entities_dir, name, SCORES_FILE))
        labels_path = os.path.join(entities_dir, name, LABELS_FILE)
        labels = align_labels(scores, read_labels(labels_path), labels_path)
        threshold, report = select_threshold(scores, labels)
        reports[name] = report
        flag_groups.append(scores.scores > threshold)
        label_groups.append(labels)
        logger.info(f"{name}: adjusted F1={report.f1_adjusted:.4f}")

    pooled = pooled_report(flag_groups, label_groups)
    mean_f1 = float(np.mean([r.f1_adjusted for r in reports.values()]))
    logger.info(f"Pooled adjusted F1={pooled.f1_adjusted:.4f}, mean per-entity adjusted F1={mean_f1:.4f}")
    out_prefix = out_prefix or os.path.join(entities_dir, REPORT_PREFIX)
    _write_report(pooled, out_prefix)
    save_to_json(
        {"entities": {n: r.to_dict() for n, r in reports.items()}, "mean_f1_adjusted": mean_f1},
        f"{out_prefix}_entities.json",
    )
    return reports, pooled


def run_variant(config: RunConfig, dataset: Dataset, workers: int = 1) -> EvalReport:
    """Train, score and evaluate one configuration in memory."""
    model = FmuadModel(config.hyperparameters(dataset.m), seed=config.seed, stats=dataset.normalization_stats)
    Trainer(model, config).train(dataset.train.values)
    scores, _ = score_series(model, dataset.test.values, workers=workers)
    labels = dataset.test_labels[scores.timestamps]
    _, report = select_threshold(scores, labels)
    return report


def cmd_ablate(
    config: RunConfig,
    dataset: Dataset,
    out_path: str,
    variants: Sequence[str] = tuple(ABLATION_VARIANTS),
    losses: Sequence[str] = ("full",),
    seeds: Sequence[int] = (0,),
) -> List[dict]:
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ConfigError("variants", f"unknown ablation variants {unknown}, choose from {list(ABLATION_VARIANTS)}")
    rows = []
    for variant in variants:
        for loss in losses:
            f1s = []
            for seed in seeds:
                run = replace(config, detectors=ABLATION_VARIANTS[variant], loss=loss, seed=seed).validate()
                report = run_variant(run, dataset, workers=config.workers)
                f1s.append(report.f1_adjusted)
                rows.append(
                    {
                        "variant": variant,
                        "detectors": "+".join(run.detectors),
                        "loss": loss,
                        "seed": seed,
                        "f1": report.f1,
                        "f1_adjusted": report.f1_adjusted,
                        "threshold": report.threshold,
                    }
                )
            logger.info(
                f"Ablation {variant}/{loss}: adjusted F1 mean={np.mean(f1s):.4f} var={np.var(f1s):.6f} "
                f"over {len(f1s)} seed(s)"
            )
    create_folder_if_not_exists(os.path.dirname(out_path))
    pd.DataFrame(rows, columns=["variant", "detectors", "loss", "seed", "f1", "f1_adjusted", "threshold"]).to_csv(
        out_path, index=False
    )
    return rows
