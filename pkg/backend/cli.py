import argparse
import os
import sys
from typing import List, Optional

from src.common.logger import get_logger
from src.services.checkpoint import load_checkpoint
from src.services.commands import (
    ABLATION_VARIANTS,
    cmd_ablate,
    cmd_eval,
    cmd_eval_entities,
    cmd_score,
    cmd_synth,
    cmd_train,
)
from src.services.dataset import load_dataset_dir
from src.services.run_config import LOSS_VARIANTS, RunConfig
from src.services.synthetic import KINDS, SyntheticSpec

logger = get_logger("cli")

RUN_FLAGS = (
    "tau",
    "k",
    "stride",
    "batch_size",
    "epochs",
    "learning_rate",
    "hidden_ch",
    "lstm_kernel",
    "dilated_channels",
    "dilations",
    "detectors",
    "loss",
    "seed",
    "train_stride",
    "workers",
    "data_dir",
    "output_dir",
)


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run configuration (overrides --config)")
    group.add_argument("--config", help="key=value run file")
    group.add_argument("--tau", type=int, help="input instance span")
    group.add_argument("--k", type=int, help="window length (even)")
    group.add_argument("--stride", type=int, help="history window stride s")
    group.add_argument("--batch-size", type=int)
    group.add_argument("--epochs", type=int)
    group.add_argument("--learning-rate", type=float)
    group.add_argument("--hidden-ch", type=int, help="ConvLSTM hidden channels")
    group.add_argument("--lstm-kernel", type=int)
    group.add_argument("--dilated-channels", type=_int_list, help="e.g. 32,64,128")
    group.add_argument("--dilations", type=_int_list, help="e.g. 1,3,5")
    group.add_argument("--detectors", type=_str_list, help="subset of correlation,temporal,spatial or 'all'")
    group.add_argument("--loss", choices=LOSS_VARIANTS)
    group.add_argument("--seed", type=int)
    group.add_argument("--train-stride", type=int, help="training window stride, 0 means k")
    group.add_argument("--workers", type=int, help="scoring threads")
    group.add_argument("--data-dir", help="directory with train.csv, test.csv, labels.txt")
    group.add_argument("--output-dir")


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name, None) for name in RUN_FLAGS}
    return RunConfig.from_sources(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmuad", description="Multi-aspect forecast-based anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--spec", help="YAML synthetic spec (as echoed by a previous run)")
    synth.add_argument("--m", type=int)
    synth.add_argument("--train-length", type=int)
    synth.add_argument("--test-length", type=int)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--anomaly-ratio", type=float)
    synth.add_argument("--kinds", type=_str_list, help=f"subset of {','.join(KINDS)}")
    synth.add_argument("--no-anomalies", action="store_true", help="write an anomaly-free test split")

    train = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_run_flags(train)
    train.add_argument("--checkpoint", help="checkpoint output path")
    train.add_argument("--log", help="per-epoch training log CSV")

    score = sub.add_parser("score", help="score a test series with a checkpoint")
    score.add_argument("--checkpoint", required=True)
    score.add_argument("--test", required=True, help="test CSV or dataset directory")
    score.add_argument("--out", required=True, help="scores CSV")
    score.add_argument("--breakdown", help="per-detector breakdown CSV")
    score.add_argument("--workers", type=int, default=1)

    evaluate = sub.add_parser("eval", help="best-F1 evaluation of scores against labels")
    evaluate.add_argument("--scores")
    evaluate.add_argument("--labels")
    evaluate.add_argument("--entities", help="directory of <entity>/scores.csv and <entity>/labels.txt")
    evaluate.add_argument(
        "--out", help="report prefix, writes <out>.txt and <out>.json (default: report next to the scores)"
    )

    ablate = sub.add_parser("ablate", help="train and evaluate detector and loss variants")
    _add_run_flags(ablate)
    ablate.add_argument("--variants", type=_str_list, default=list(ABLATION_VARIANTS))
    ablate.add_argument("--losses", type=_str_list, default=["full"])
    ablate.add_argument("--seeds", type=_int_list, default=[0])
    ablate.add_argument("--out", help="ablation CSV")
    return parser


def run(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if args.command == "synth":
        spec = None
        if args.no_anomalies:
            spec = SyntheticSpec.default(args.m, args.train_length, args.test_length, args.seed, kinds=())
        cmd_synth(
            args.out,
            spec=spec,
            spec_path=args.spec,
            m=args.m,
            train_length=args.train_length,
            test_length=args.test_length,
            seed=args.seed,
            kinds=args.kinds,
            anomaly_ratio=args.anomaly_ratio,
        )
    elif args.command == "train":
        cmd_train(_run_config(args), checkpoint_path=args.checkpoint, log_path=args.log)
    elif args.command == "score":
        cmd_score(load_checkpoint(args.checkpoint), args.test, args.out, args.workers, args.breakdown)
    elif args.command == "eval":
        if args.entities:
            _, report = cmd_eval_entities(args.entities, args.out)
        elif args.scores and args.labels:
            report = cmd_eval(args.scores, args.labels, args.out)
        else:
            parser.error("eval needs --scores and --labels, or --entities")
        sys.stdout.write(report.to_text())
    elif args.command == "ablate":
        config = _run_config(args)
        if not config.data_dir:
            parser.error("ablate needs --data-dir")
        out = args.out or os.path.join(config.output_dir, "ablation.csv")
        cmd_ablate(config, load_dataset_dir(config.data_dir), out, args.variants, args.losses, args.seeds)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run(args, parser)
    except (ValueError, OSError) as e:
        logger.error(f"{args.command} failed", e)
        sys.stderr.write(f"error: {e}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
