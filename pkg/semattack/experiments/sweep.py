"""Attacked accuracy as a function of the attack subspace rank."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from semattack.attacks import evaluate_attack, semantic_attack
from semattack.config import ExperimentConfig
from semattack.errors import ConfigError
from semattack.experiments.runs import RESULTS, Run, evaluation_slice, target_model, training_data
from semattack.models import Classifier
from semattack.transforms import RANK_MULTIPLICATIVE, SUBSPACE_ADDITIVE

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "transform",
    "rectified",
    "k",
    "eps",
    "clean_accuracy",
    "attacked_accuracy",
    "success_rate",
    "mean_iterations",
    "mean_linf",
    "n_attacked",
    "constraint",
    "seed",
]
LONG_METRICS = ["attacked_accuracy", "success_rate", "mean_iterations", "mean_linf"]


@dataclass
class SweepReport:
    rows: pd.DataFrame
    samples: pd.DataFrame

    def long_format(self) -> pd.DataFrame:
        return self.rows.melt(
            id_vars=["transform", "rectified", "k", "eps", "seed"],
            value_vars=LONG_METRICS,
            var_name="metric",
            value_name="value",
        )

    def accuracy(self, transform: str, rectified: bool) -> pd.Series:
        """Attacked accuracy of one variant indexed by k."""
        rows = self.rows[(self.rows["transform"] == transform) & (self.rows["rectified"] == rectified)]
        return rows.set_index("k")["attacked_accuracy"].sort_index()


def _active_for(active: tuple[int, ...] | None, k: int) -> tuple[int, ...] | None:
    if active is None:
        return None
    kept = tuple(i for i in active if i < k)
    return kept or None


def _binding(table: pd.DataFrame) -> str:
    attacked = table[table["attacked"]]["constraint"]
    if attacked.empty:
        return "none"
    return str(attacked.value_counts().sort_index().idxmax())


def run_dimensionality_sweep(
    cfg: ExperimentConfig,
    model: Classifier | None = None,
    X: np.ndarray | None = None,
    y: np.ndarray | None = None,
    progress: bool = False,
) -> SweepReport:
    """
    Attack every (transform kind, rectified) variant at every configured rank.

    Bases are nested: a single d x k_max draw is sliced to its first k
    columns, so each rank's attack space contains the previous one's.
    """
    d = cfg.data.d
    for k in cfg.sweep.k:
        if not 1 <= k <= d:
            raise ConfigError(f"sweep rank k={k} must satisfy 1 <= k <= d={d}")
    if model is None or X is None:
        dataset = training_data(cfg)
        if model is None:
            model = target_model(cfg, dataset, progress=progress)
        X, y = evaluation_slice(cfg, dataset)

    attack_cfg = cfg.attack.attack_config()
    basis = cfg.transform.basis_matrix(d, max(cfg.sweep.k))
    rows, samples = [], []
    for kind in cfg.sweep.kinds:
        for rectified in cfg.sweep.rectified:
            for k in sorted(cfg.sweep.k):
                active = _active_for(cfg.sweep.active, k)
                if cfg.sweep.active is not None and active is None:
                    logger.warning("no active parameter below k=%d; skipping %s", k, kind)
                    continue
                spec = cfg.transform.spec(
                    d,
                    kind=kind,
                    k=k,
                    rectified=rectified,
                    eps_linf=attack_cfg.eps_linf,
                    active=active,
                    U=basis[:, :k],
                )
                evaluation = evaluate_attack(
                    model,
                    X,
                    y,
                    lambda x, label, rng: semantic_attack(model, spec, x, label, attack_cfg),
                    seed=attack_cfg.seed,
                    name="semantic",
                    transform=kind,
                    rectified=rectified,
                    k=k,
                    eps=attack_cfg.eps_linf,
                    progress=progress,
                )
                rows.append(
                    {
                        "transform": kind,
                        "rectified": rectified,
                        "k": k,
                        "eps": attack_cfg.eps_linf,
                        "clean_accuracy": evaluation.clean_accuracy,
                        "attacked_accuracy": evaluation.attacked_accuracy,
                        "success_rate": evaluation.success_rate,
                        "mean_iterations": evaluation.mean_iterations,
                        "mean_linf": evaluation.mean_linf,
                        "n_attacked": int(evaluation.table["attacked"].sum()),
                        "constraint": _binding(evaluation.table),
                        "seed": attack_cfg.seed,
                    }
                )
                samples.append(evaluation.table)
                logger.info(
                    "%s rectified=%s k=%d: attacked accuracy %.4f",
                    kind,
                    rectified,
                    k,
                    evaluation.attacked_accuracy,
                )
    return SweepReport(
        rows=pd.DataFrame(rows, columns=SWEEP_COLUMNS),
        samples=pd.concat(samples, ignore_index=True) if samples else pd.DataFrame(),
    )


def check_sweep(report: SweepReport, band: float) -> list[str]:
    """
    Trend checks on a sweep: attacked accuracy non-increasing in k for each
    variant, additive at most multiplicative, rectified at least unrectified.
    """
    violations = []
    rows = report.rows
    for (kind, rectified), _ in rows.groupby(["transform", "rectified"]):
        series = report.accuracy(kind, rectified)
        for (k_prev, prev), (k_next, nxt) in zip(series.items(), list(series.items())[1:]):
            if nxt > prev + band:
                violations.append(
                    f"{kind} rectified={rectified}: accuracy rises from {prev:.4f} at k={k_prev} "
                    f"to {nxt:.4f} at k={k_next}"
                )
    kinds = set(rows["transform"])
    for rectified in sorted(set(rows["rectified"])):
        if {SUBSPACE_ADDITIVE, RANK_MULTIPLICATIVE} <= kinds:
            additive = report.accuracy(SUBSPACE_ADDITIVE, rectified)
            multiplicative = report.accuracy(RANK_MULTIPLICATIVE, rectified)
            for k in additive.index.intersection(multiplicative.index):
                if additive[k] > multiplicative[k] + band:
                    violations.append(
                        f"k={k} rectified={rectified}: additive {additive[k]:.4f} above "
                        f"multiplicative {multiplicative[k]:.4f}"
                    )
    if {False, True} <= set(rows["rectified"]):
        for kind in sorted(kinds):
            plain = report.accuracy(kind, False)
            relu = report.accuracy(kind, True)
            for k in plain.index.intersection(relu.index):
                if relu[k] < plain[k] - band:
                    violations.append(
                        f"{kind} k={k}: rectified {relu[k]:.4f} below "
                        f"unrectified {plain[k]:.4f}"
                    )
    return violations


def write_sweep(run: Run, report: SweepReport) -> None:
    run.write_csv("sweep.csv", report.rows)
    run.write_csv("sweep_long.csv", report.long_format())
    run.write_csv(RESULTS, report.samples)
