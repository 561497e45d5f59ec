"""Summaries of the per-sample results of a finished run."""

from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from semattack.experiments.runs import read_results
from semattack.persistence import atomic_write_text

logger = logging.getLogger(__name__)

SUMMARY = "summary.csv"
GROUP_KEYS = ["attack", "transform", "rectified", "k", "eps"]


def summarize_results(results: pd.DataFrame) -> pd.DataFrame:
    """
    Per (attack, transform, rectified, k, eps) group: attacked accuracy,
    success rate among samples that were attacked, mean iterations and the
    mean and maximum l-inf distance.
    """
    keys = [key for key in GROUP_KEYS if key in results.columns]
    frame = results.assign(
        success=results["success"].astype(bool),
        attacked=results["attacked"].astype(bool),
    )
    frame["flipped"] = frame["success"] & frame["attacked"]
    summary = frame.groupby(keys, dropna=False, sort=True).agg(
        n=("sample_id", "size"),
        attacked_accuracy=("success", lambda s: 1.0 - s.mean()),
        mean_iterations=("iterations", "mean"),
        mean_linf=("linf_dist", "mean"),
        max_linf=("linf_dist", "max"),
        n_attacked=("attacked", "sum"),
        flipped=("flipped", "sum"),
    )
    attacked = summary["n_attacked"].where(summary["n_attacked"] > 0)
    summary["success_rate"] = (summary["flipped"] / attacked).fillna(0.0)
    return summary.drop(columns="flipped").reset_index()


def report_run(directory: str | Path) -> pd.DataFrame:
    """Write ``summary.csv`` next to the run's ``results.csv`` and return it."""
    summary = summarize_results(read_results(directory))
    path = Path(directory) / SUMMARY
    atomic_write_text(path, summary.to_csv(index=False, lineterminator="\n"))
    logger.info("Wrote %d summary rows to %s", len(summary), path)
    return summary
