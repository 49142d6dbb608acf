"""Command-line entry point.

Subcommands: train, selftrain, llm-label, evaluate, sweep, report.
Each run writes per-seed directories (resolved config, model, metrics,
history/records) plus a cross-seed aggregate. Exit codes partition the
error classes: config 2, data 3, training 4, llm 5, io 6.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import experiment
from .classifier import BaselineTextClassifier
from .config import ExperimentConfig, load_config
from .data import split_train_test
from .errors import (
    ConfigError,
    DataError,
    LlmError,
    SelftrainError,
    TrainingError,
)
from .sweep import SweepSpec, load_rows, render_report, run_sweep

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_LLM = 5
EXIT_IO = 6

log = logging.getLogger("selftrain")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config (json or yaml)")
    parser.add_argument("--seed", type=int, default=None, help="override config seeds with one seed")
    parser.add_argument("--out", default=None, help="override the config output directory")
    parser.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selftrain",
        description="Few-shot text classification via self-training and LLM-assisted labeling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="supervised baseline on the n-shot gold seed")
    _add_common(p)

    p = sub.add_parser("selftrain", help="iterative self-training with a selection strategy")
    _add_common(p)

    p = sub.add_parser("llm-label", help="LLM-assisted labeling (sub or obj modes)")
    _add_common(p)
    p.add_argument("--mode", choices=["sub", "obj", "obj-conf", "obj-conf-score"])
    p.add_argument("--threshold", type=float, help="score threshold for obj-conf-score")
    p.add_argument("--n-shot", type=int, dest="llm_n_shot", help="few-shot examples per class")
    p.add_argument("--fixtures", help="mock fixture file (jsonl)")
    p.add_argument("--endpoint", help="chat-completion endpoint URL")

    p = sub.add_parser("evaluate", help="evaluate a saved model on the config's test split")
    _add_common(p)
    p.add_argument("--model", required=True, help="model artifact path")

    p = sub.add_parser("sweep", help="grid sweep over a threshold or n-shot axis")
    _add_common(p)
    p.add_argument("--axis", required=True,
                   choices=["conf_threshold", "ent_threshold", "score_threshold", "n_shot"])
    p.add_argument("--grid", required=True, help="comma-separated grid values")
    p.add_argument("--seeds", help="comma-separated seeds (default: config seeds)")

    p = sub.add_parser("report", help="re-render report files from persisted sweep rows")
    p.add_argument("--rows", required=True, help="a sweep.json produced by `sweep`")
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true")
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    return config


def _dump_json(payload, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def _run_per_seed(config: ExperimentConfig, cell) -> int:
    results = {}
    for root_seed in config.seeds:
        result = cell(config, root_seed)
        run_dir = os.path.join(config.output_dir, f"seed-{root_seed}")
        experiment.write_run_dir(result, run_dir)
        results[root_seed] = result
        log.info(
            "seed %d: accuracy=%.4f macro_f1=%.4f num_added=%d",
            root_seed, result.report.accuracy, result.report.macro_f1, result.num_added,
        )
        print(
            f"seed {root_seed}: accuracy={result.report.accuracy:.4f} "
            f"macro_f1={result.report.macro_f1:.4f} num_added={result.num_added}"
        )
    summary = experiment.aggregate_runs(results)
    _dump_json(summary, os.path.join(config.output_dir, "aggregate.json"))
    mean = summary["macro_f1"]["mean"]
    ci = summary["macro_f1"]["ci95"]
    spread = f" +/- {ci:.4f}" if ci is not None else ""
    print(f"mean macro_f1 over {len(config.seeds)} seed(s): {mean:.4f}{spread}")
    return EXIT_OK


def cmd_train(args) -> int:
    return _run_per_seed(_load(args), experiment.run_train_cell)


def cmd_selftrain(args) -> int:
    return _run_per_seed(_load(args), experiment.run_selftrain_cell)


def cmd_llm(args) -> int:
    config = _load(args)
    if config.llm is None:
        raise ConfigError("llm-label needs an 'llm' block in the config")
    overrides = {}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.llm_n_shot is not None:
        overrides["n_shot"] = args.llm_n_shot
    if args.fixtures is not None:
        overrides["fixtures"] = args.fixtures
    if args.endpoint is not None:
        overrides["endpoint"] = args.endpoint
    if overrides:
        config = replace(config, llm=replace(config.llm, **overrides))
    return _run_per_seed(config, experiment.run_llm_cell)


def cmd_evaluate(args) -> int:
    config = _load(args)
    dataset = experiment.build_dataset(config)
    _, test = split_train_test(dataset, config.split)
    model = BaselineTextClassifier.load(args.model)
    report = experiment.evaluate(model, test)
    os.makedirs(config.output_dir, exist_ok=True)
    _dump_json(report.to_dict(), os.path.join(config.output_dir, "metrics.json"))
    print(f"accuracy={report.accuracy:.4f} macro_f1={report.macro_f1:.4f} n={report.n_evaluated}")
    return EXIT_OK


def _parse_grid(text: str, axis: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if axis == "n_shot":
        return tuple(int(p) for p in parts)
    return tuple(float(p) for p in parts)


def cmd_sweep(args) -> int:
    config = _load(args)
    seeds = (
        tuple(int(s) for s in args.seeds.split(",")) if args.seeds else config.seeds
    )
    spec = SweepSpec(
        axis=args.axis, grid=_parse_grid(args.grid, args.axis), seeds=seeds, base=config
    )
    rows = run_sweep(spec)
    paths = render_report(rows, spec.axis, config.output_dir)
    errors = sum(1 for r in rows if r.error is not None)
    print(f"{len(rows)} cells ({errors} errors) -> {paths['json']}")
    return EXIT_OK


def cmd_report(args) -> int:
    axis, rows = load_rows(args.rows)
    paths = render_report(rows, axis, args.out)
    print(f"re-rendered {len(rows)} rows -> {paths['json']}")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "selftrain": cmd_selftrain,
    "llm-label": cmd_llm,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as e:
        print(f"training error: {e}", file=sys.stderr)
        return EXIT_TRAINING
    except LlmError as e:
        print(f"llm error: {e}", file=sys.stderr)
        return EXIT_LLM
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except SelftrainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
