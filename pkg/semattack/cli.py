"""
Command-line entry point.

    semattack <subcommand> [--config PATH] [--set key=value]... [--assert]

Exit codes: 0 on success, 2 when an ``--assert`` check fails, 1 on any other
error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Callable, Sequence

import pandas as pd

from semattack import __version__
from semattack.config import ExperimentConfig, load_config
from semattack.data import save_dataset, sample_dataset
from semattack.errors import AssertionFailure, SemattackError
from semattack.experiments import (
    Run,
    check_bound,
    check_comparison,
    check_sweep,
    report_run,
    run_attack_comparison,
    run_bound_verification,
    run_dimensionality_sweep,
    single_attack,
    target_model,
    training_data,
    write_bound,
    write_comparison,
    write_sweep,
)
from semattack.experiments.runs import RESULTS, evaluation_seed, evaluation_slice, fit_model
from semattack.models import accuracy, save_checkpoint
from semattack.tensor_math import SeededRng
from semattack.transforms import save_transform

logger = logging.getLogger(__name__)


def _finish(run: Run, violations: list[str], check: bool) -> None:
    run.extra["violations"] = violations
    run.close()
    for violation in violations:
        logger.warning("check failed: %s", violation)
    if check and violations:
        raise AssertionFailure(f"{len(violations)} check(s) failed")


def cmd_gen_data(cfg: ExperimentConfig, args) -> None:
    run = Run.open(cfg)
    dataset = training_data(cfg)
    save_dataset(dataset, run.path("dataset.json"))
    run.record("dataset.json")
    if cfg.data.eval_n:
        held_out = sample_dataset(dataset.spec, cfg.data.eval_n, SeededRng(evaluation_seed(cfg)))
        save_dataset(held_out, run.path("evaluation.json"))
        run.record("evaluation.json")
    run.close()


def cmd_train(cfg: ExperimentConfig, args) -> None:
    run = Run.open(cfg)
    dataset = training_data(cfg)
    model, history = fit_model(cfg, dataset, progress=args.progress)
    save_checkpoint(model, run.path("model.json"), config=cfg.to_dict()["model"])
    run.record("model.json")
    run.write_csv("metrics.csv", pd.DataFrame([m.to_dict() for m in history]))
    X_test, y_test = dataset.subset("test")
    run.extra["test_accuracy"] = accuracy(model, X_test, y_test)
    logger.info("Test accuracy %.4f", run.extra["test_accuracy"])
    run.close()


def cmd_attack(cfg: ExperimentConfig, args) -> None:
    run = Run.open(cfg)
    dataset = training_data(cfg)
    model = target_model(cfg, dataset, progress=args.progress)
    X, y = evaluation_slice(cfg, dataset)
    evaluation = single_attack(cfg, model, X, y, progress=args.progress)
    if cfg.attack.method in ("semantic", "worst_of_s"):
        save_transform(cfg.transform.spec(cfg.data.d, eps_linf=cfg.attack.eps_linf), run.path("transform.json"))
        run.record("transform.json")
    run.write_csv(RESULTS, evaluation.table)
    run.extra.update(
        clean_accuracy=evaluation.clean_accuracy,
        attacked_accuracy=evaluation.attacked_accuracy,
        success_rate=evaluation.success_rate,
    )
    run.close()


def cmd_sweep(cfg: ExperimentConfig, args) -> None:
    run = Run.open(cfg)
    report = run_dimensionality_sweep(cfg, progress=args.progress)
    write_sweep(run, report)
    _finish(run, check_sweep(report, cfg.sweep.band), args.check)


def cmd_compare(cfg: ExperimentConfig, args) -> None:
    run = Run.open(cfg)
    report = run_attack_comparison(cfg, progress=args.progress)
    write_comparison(run, report)
    _finish(run, check_comparison(report, cfg.compare.band), args.check)


def cmd_verify_bound(cfg: ExperimentConfig, args) -> None:
    run = Run.open(cfg)
    reports = run_bound_verification(cfg, progress=args.progress)
    write_bound(run, reports)
    _finish(run, check_bound(reports), args.check)


def cmd_report(cfg: ExperimentConfig, args) -> None:
    directory = args.run or cfg.run_dir
    summary = report_run(directory)
    print(summary.to_string(index=False))


COMMANDS: dict[str, tuple[Callable, str]] = {
    "gen-data": (cmd_gen_data, "Sample the training and evaluation mixtures"),
    "train": (cmd_train, "Train the target model and save a checkpoint"),
    "attack": (cmd_attack, "Run one attack over the evaluation slice"),
    "sweep": (cmd_sweep, "Attacked accuracy against the attack subspace rank"),
    "compare": (cmd_compare, "Semantic attacks against pixel, sampling and spatial baselines"),
    "verify-bound": (cmd_verify_bound, "Check the robust error bound by Monte Carlo"),
    "report": (cmd_report, "Summarize the per-sample results of a run"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semattack",
        description="Semantic adversarial attacks on a mixture-of-Gaussians testbed",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("-c", "--config", help="JSON or YAML run config")
        sub.add_argument(
            "-s",
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            dest="overrides",
            help="Override a dotted config key, e.g. data.sigma=0.3 (repeatable)",
        )
        sub.add_argument(
            "--assert",
            action="store_true",
            dest="check",
            help="Exit with code 2 when a benchmark check fails",
        )
        verbosity = sub.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="Log warnings only")
        if name == "report":
            sub.add_argument("--run", help="Run directory to summarize")
    return parser


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    args.progress = not args.quiet and sys.stderr.isatty()
    command, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.command, args.config, args.overrides)
        command(cfg, args)
    except AssertionFailure as e:
        logger.error("%s", e)
        return 2
    except (SemattackError, OSError) as e:
        if args.verbose:
            logger.exception("%s failed", args.command)
        else:
            logger.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
