"""
Command-line entry point: train, eval, inspect-filters, bench and gen-data.

Exit codes: 0 success, 2 config error, 3 artifact/format error, 4 training divergence.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch
from dotenv import load_dotenv

from . import __version__
from .analysis.bench import DEFAULT_LENGTHS, run_bench, summarize, width_ratio
from .analysis.filters import inspect_filters
from .config import ExperimentConfig, RunConfig, load_config_file, parse_overrides, resolve_experiment
from .data.corpus import BYTE_VOCAB, CorpusDataset
from .data.recall import RecallDataset, split_recall
from .errors import ConfigError, FocusError, InputError
from .iir.export import write_csv
from .model.focus import FocusModel
from .tensor.checkpoint import Checkpoint
from .train.loop import build_optimizer, evaluate, fast_forward, seed_everything, train

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.focus"
LOG_FILE = "train_log.csv"
METRICS_FILE = "metrics.json"
DATASET_FILE = "dataset.focus"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    common.add_argument("--seed", type=int, help="random seed (falls back to FOCUS_SEED)")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="focus-iir", description="Focus layer experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--task", choices=["recall", "charlm"])
        p.add_argument("--L", type=int, help="sequence length")
        p.add_argument("--ablation", action="store_true", default=None, help="static filters (Focus-H)")
        p.add_argument("--corpus", help="byte corpus for the charlm task")
        p.add_argument("--data", type=Path, help="recall dataset cache written by gen-data")

    p = sub.add_parser("train", parents=[common], help="train a model")
    experiment_flags(p)
    p.add_argument("--resume", type=Path, help="continue from a checkpoint")

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the held-out split")
    experiment_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)

    p = sub.add_parser("inspect-filters", parents=[common], help="per-bin frequency responses")
    experiment_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, help="whitespace-separated token ids (default: a held-out recall sample)")
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--channel", type=int, help="single channel instead of the channel mean")
    p.add_argument("--applied", action="store_true", help="report the shifted coefficients")

    p = sub.add_parser("bench", parents=[common], help="forward-pass scaling benchmark")
    p.add_argument("--lengths", type=int, nargs="+", default=list(DEFAULT_LENGTHS))
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--chunk", type=int, default=32)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--attention-max-len", type=int, default=4096)
    p.add_argument("--ratio-length", type=int, help="length for the width-doubling ratio (default: smallest)")
    p.add_argument("--no-pin", action="store_true", help="do not pin torch to one thread")

    p = sub.add_parser("gen-data", parents=[common], help="write the recall dataset cache")
    experiment_flags(p)
    return parser


def flag_values(args: argparse.Namespace) -> Dict[str, Any]:
    values: Dict[str, Any] = dict(parse_overrides(args.overrides))
    for key in ("task", "L", "ablation", "corpus", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return values


def resolve(args: argparse.Namespace, base: Optional[Dict[str, Any]] = None) -> Tuple[RunConfig, ExperimentConfig]:
    """Merge defaults < FOCUS_SEED < stored/base < config file < CLI flags."""
    file_values: Dict[str, Any] = {k: v for k, v in (base or {}).items() if v is not None}
    if args.config is not None:
        file_values.update(load_config_file(args.config))
    flags = flag_values(args)
    experiment = resolve_experiment(file_values, flags)
    run = RunConfig(
        command=args.command,
        config_path=args.config,
        overrides={k: str(v) for k, v in flags.items()},
        output_dir=args.out,
        seed=experiment.seed,
    )
    return run, experiment


def load_datasets(experiment: ExperimentConfig, data_path: Optional[Path] = None):
    """Train and held-out splits for the configured task."""
    tc = experiment.train_config()
    if tc.task == "charlm":
        if experiment.focus_config().vocab != BYTE_VOCAB:
            raise ConfigError(f"charlm needs vocab {BYTE_VOCAB}")
        return CorpusDataset.from_file(tc.corpus, experiment.L).split(tc.test_fraction)
    fc = experiment.focus_config()
    if data_path is not None:
        dataset = RecallDataset.load(data_path)
        if dataset.seq_len != fc.L:
            raise ConfigError(f"Dataset {data_path} has length {dataset.seq_len}, config L is {fc.L}")
    else:
        dataset = RecallDataset.generate(fc.vocab, fc.L, tc.n_samples, tc.seed)
    return split_recall(dataset, tc.test_fraction, tc.seed)


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_train(args: argparse.Namespace) -> int:
    run, experiment = resolve(args)
    fc, tc = experiment.focus_config(), experiment.train_config()
    seed_everything(tc.seed)
    train_data, test_data = load_datasets(experiment, args.data)

    optimizer = scheduler = None
    start_epoch = start_step = 0
    if args.resume is not None:
        model, ckpt = FocusModel.load_checkpoint(args.resume, config=fc)
        steps_per_epoch = max(1, -(-len(train_data) // tc.batch))
        optimizer, scheduler = build_optimizer(model, tc, steps_per_epoch)
        model.restore_optimizer(optimizer, ckpt.optimizer)
        start_epoch = int(ckpt.meta.get("epoch", 0))
        start_step = int(ckpt.meta.get("step", 0))
        fast_forward(scheduler, start_step)
        logger.info(f"Resuming from {args.resume} at epoch {start_epoch}, step {start_step}")
    else:
        model = FocusModel(fc, seed=tc.seed)

    result = train(
        model, train_data, test_data, tc,
        optimizer=optimizer, scheduler=scheduler, start_epoch=start_epoch, start_step=start_step,
    )
    out = run.output_dir
    model.save_checkpoint(
        out / CHECKPOINT_FILE,
        optimizer=result.optimizer,
        meta={"experiment": experiment.model_dump(), "epoch": result.epoch, "step": result.step},
    )
    result.log.to_csv(out / LOG_FILE)
    metrics = {"task": tc.task, "epoch": result.epoch, "step": result.step,
               "stopped_early": result.stopped_early, **result.metrics}
    write_json(out / METRICS_FILE, metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def load_for_eval(args: argparse.Namespace) -> Tuple[RunConfig, ExperimentConfig, FocusModel]:
    ckpt = Checkpoint.load(args.checkpoint)
    run, experiment = resolve(args, base=ckpt.meta.get("experiment"))
    model = FocusModel(experiment.focus_config(), seed=None)
    model.load_params(ckpt.params)
    return run, experiment, model


def cmd_eval(args: argparse.Namespace) -> int:
    run, experiment, model = load_for_eval(args)
    _, test_data = load_datasets(experiment, args.data)
    metrics = {"task": experiment.task, **evaluate(model, test_data, experiment.task, experiment.batch)}
    write_json(run.output_dir / METRICS_FILE, metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def read_tokens(path: Path) -> torch.Tensor:
    if not path.is_file():
        raise InputError(f"Token file not found: {path}")
    try:
        ids = [int(tok) for tok in path.read_text(encoding="utf-8").split()]
    except ValueError as e:
        raise InputError(f"{path} must hold whitespace-separated integer token ids") from e
    if not ids:
        raise InputError(f"{path} holds no tokens")
    return torch.tensor(ids, dtype=torch.int64)


def cmd_inspect_filters(args: argparse.Namespace) -> int:
    run, experiment, model = load_for_eval(args)
    query_pos = None
    if args.input is not None:
        tokens = read_tokens(args.input)
    else:
        if experiment.task != "recall":
            raise ConfigError("--input is required unless the checkpoint was trained on recall")
        _, test_data = load_datasets(experiment, args.data)
        if not 0 <= args.sample_index < len(test_data):
            raise ConfigError(f"sample-index must be in [0, {len(test_data)}), got {args.sample_index}")
        tokens = test_data.tokens[args.sample_index]
        query_pos = int(test_data.query_pos[args.sample_index])
    report = inspect_filters(model, tokens, layer=args.layer, channel=args.channel,
                             applied=args.applied, query_pos=query_pos)
    out = run.output_dir
    frames = (("magnitude", report.magnitude), ("summary", report.summary), ("impulse", report.impulse),
              ("response", report.response))
    for name, frame in frames:
        logger.info(f"Wrote {write_csv(frame, out / f'filters_{name}.csv')}")
    print(report.summary.to_string(index=False))
    if report.query_bin is not None:
        print(f"query bin {report.query_bin}: peak/median = {report.focus_ratio():.3f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    run, experiment = resolve(args)
    frame = run_bench(
        lengths=args.lengths,
        width=args.width,
        chunk=args.chunk,
        repeats=args.repeats,
        attention_max_len=args.attention_max_len,
        seed=experiment.seed,
        single_thread=not args.no_pin,
    )
    ratio_length = args.ratio_length or min(args.lengths)
    ratio = width_ratio(ratio_length, args.width, args.chunk, args.repeats, experiment.seed)
    summary = summarize(frame, ratio)
    write_csv(frame, run.output_dir / "bench.csv")
    write_json(run.output_dir / "bench_summary.json", summary)
    print(frame.to_string(index=False))
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    run, experiment = resolve(args)
    if experiment.task != "recall":
        raise ConfigError("gen-data only generates the recall task")
    fc, tc = experiment.focus_config(), experiment.train_config()
    dataset = RecallDataset.generate(fc.vocab, fc.L, tc.n_samples, tc.seed)
    dataset.save(args.data or run.output_dir / DATASET_FILE)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "inspect-filters": cmd_inspect_filters,
    "bench": cmd_bench,
    "gen-data": cmd_gen_data,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FocusError as e:
        logger.error(str(e))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
