"""
Semantic attacks against pixel, sampling and spatial baselines.

The pixel budget is not chosen by hand: a box-only additive semantic attack
runs first and eps is a quantile of its l-inf distances. Every baseline is
then evaluated at that eps on the same evaluation slice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from semattack.attacks import (
    Evaluation,
    cw_linf_attack,
    evaluate_attack,
    fgsm_attack,
    pgd_attack,
    semantic_attack,
    spatial_grid_attack,
    worst_of_s_random,
)
from semattack.config import ExperimentConfig
from semattack.experiments.runs import RESULTS, Run, evaluation_slice, target_model, training_data
from semattack.models import Classifier
from semattack.transforms import SUBSPACE_ADDITIVE

logger = logging.getLogger(__name__)

COMPARE_COLUMNS = [
    "attack",
    "transform",
    "rectified",
    "k",
    "eps",
    "clean_accuracy",
    "attacked_accuracy",
    "success_rate",
    "mean_linf",
    "seed",
]


@dataclass
class ComparisonReport:
    eps: float
    rows: pd.DataFrame
    samples: pd.DataFrame

    def accuracy(self, attack: str, transform: str = "", rectified: bool = False) -> float:
        match = self.rows[
            (self.rows["attack"] == attack)
            & (self.rows["transform"] == transform)
            & (self.rows["rectified"] == rectified)
        ]
        return float(match["attacked_accuracy"].iloc[0])


def _row(evaluation: Evaluation, attack: str, transform: str, rectified: bool, k, eps, seed) -> dict:
    return {
        "attack": attack,
        "transform": transform,
        "rectified": rectified,
        "k": k,
        "eps": eps,
        "clean_accuracy": evaluation.clean_accuracy,
        "attacked_accuracy": evaluation.attacked_accuracy,
        "success_rate": evaluation.success_rate,
        "mean_linf": evaluation.mean_linf,
        "seed": seed,
    }


def run_attack_comparison(
    cfg: ExperimentConfig,
    model: Classifier | None = None,
    X: np.ndarray | None = None,
    y: np.ndarray | None = None,
    progress: bool = False,
) -> ComparisonReport:
    d = cfg.data.d
    if model is None or X is None:
        dataset = training_data(cfg)
        if model is None:
            model = target_model(cfg, dataset, progress=progress)
        X, y = evaluation_slice(cfg, dataset)

    box_only = cfg.attack.attack_config()
    seed = box_only.seed
    k = cfg.compare.k
    basis = cfg.transform.basis_matrix(d, k)
    rows, samples = [], []

    def record(evaluation: Evaluation, attack: str, transform="", rectified=False, k=None, eps=None):
        rows.append(_row(evaluation, attack, transform, rectified, k, eps, seed))
        samples.append(evaluation.table)
        logger.info("%s %s: attacked accuracy %.4f", attack, transform, evaluation.attacked_accuracy)

    reference_spec = cfg.transform.spec(
        d, kind=SUBSPACE_ADDITIVE, k=k, rectified=False, eps_linf=None, U=basis
    )
    reference = evaluate_attack(
        model,
        X,
        y,
        lambda x, label, rng: semantic_attack(model, reference_spec, x, label, box_only),
        seed=seed,
        name="semantic_box",
        transform=SUBSPACE_ADDITIVE,
        k=k,
        progress=progress,
    )
    record(reference, "semantic_box", SUBSPACE_ADDITIVE, False, k)
    eps = reference.linf_quantile(cfg.compare.quantile)
    if eps == 0.0:
        logger.warning("the reference semantic attack never moved an input; pixel budget is 0")
    logger.info("Pixel budget eps=%.6g from the %.2f quantile", eps, cfg.compare.quantile)

    attack_cfg = cfg.attack.attack_config(eps_linf=eps)
    step = attack_cfg.step_for(eps)
    pixel_attacks = {
        "fgsm": lambda x, label, rng: fgsm_attack(model, x, label, eps),
        "pgd": lambda x, label, rng: pgd_attack(
            model, x, label, eps, step, attack_cfg.pgd_iters, rng, attack_cfg.pgd_restarts
        ),
        "cw_linf": lambda x, label, rng: cw_linf_attack(
            model, x, label, eps, step, attack_cfg.pgd_iters
        ),
    }
    for name, attack in pixel_attacks.items():
        record(evaluate_attack(model, X, y, attack, seed=seed, name=name, eps=eps, progress=progress), name, eps=eps)

    for kind in cfg.sweep.kinds:
        for rectified in cfg.sweep.rectified:
            spec = cfg.transform.spec(d, kind=kind, k=k, rectified=rectified, eps_linf=eps, U=basis)
            for name, attack in (
                ("semantic", lambda x, label, rng: semantic_attack(model, spec, x, label, attack_cfg)),
                ("worst_of_s", lambda x, label, rng: worst_of_s_random(model, spec, x, label, attack_cfg, rng)),
            ):
                evaluation = evaluate_attack(
                    model,
                    X,
                    y,
                    attack,
                    seed=seed,
                    name=name,
                    transform=kind,
                    rectified=rectified,
                    k=k,
                    eps=eps,
                    progress=progress,
                )
                record(evaluation, name, kind, rectified, k, eps)

    spatial = evaluate_attack(
        model,
        X,
        y,
        lambda x, label, rng: spatial_grid_attack(model, x, label, attack_cfg.grid),
        seed=seed,
        name="spatial",
        transform="affine_spatial",
        progress=progress,
    )
    record(spatial, "spatial", "affine_spatial")

    return ComparisonReport(
        eps=eps,
        rows=pd.DataFrame(rows, columns=COMPARE_COLUMNS),
        samples=pd.concat(samples, ignore_index=True),
    )


def check_comparison(report: ComparisonReport, band: float) -> list[str]:
    """
    Ordering checks: CW-l-inf <= PGD <= FGSM in attacked accuracy, spatial and
    worst-of-s strictly below clean accuracy, and the semantic attack at most
    worst-of-s for every transform configuration with one exception allowed.
    """
    violations = []
    fgsm, pgd, cw = (report.accuracy(a) for a in ("fgsm", "pgd", "cw_linf"))
    if pgd > fgsm + band:
        violations.append(f"PGD accuracy {pgd:.4f} above FGSM {fgsm:.4f}")
    if cw > pgd + band:
        violations.append(f"CW-l-inf accuracy {cw:.4f} above PGD {pgd:.4f}")

    sampled_rows = report.rows[report.rows["attack"].isin(["spatial", "worst_of_s"])]
    for _, row in sampled_rows.iterrows():
        if row["attacked_accuracy"] >= row["clean_accuracy"]:
            violations.append(
                f"{row['attack']} {row['transform']} accuracy {row['attacked_accuracy']:.4f} "
                f"not below clean {row['clean_accuracy']:.4f}"
            )

    semantic = report.rows[report.rows["attack"] == "semantic"]
    exceptions = []
    for _, row in semantic.iterrows():
        sampled = report.accuracy("worst_of_s", row["transform"], row["rectified"])
        if row["attacked_accuracy"] > sampled:
            exceptions.append(
                f"{row['transform']} rectified={row['rectified']}: semantic "
                f"{row['attacked_accuracy']:.4f} above worst-of-s {sampled:.4f}"
            )
    if len(exceptions) > 1:
        violations.extend(exceptions)
    return violations


def write_comparison(run: Run, report: ComparisonReport) -> None:
    run.extra["eps"] = report.eps
    run.write_csv("comparison.csv", report.rows)
    run.write_csv(RESULTS, report.samples)
