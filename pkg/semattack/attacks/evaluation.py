"""
Evaluation harness: run one attack over a slice and measure attacked accuracy.

Samples the model already gets wrong count as successes without being
attacked. Each attacked sample gets its own random stream derived from the
run seed and its index, so results do not depend on evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from tqdm import tqdm

from semattack.attacks.base import AttackResult
from semattack.models import Classifier
from semattack.models.losses import index_to_label, label_to_index
from semattack.tensor_math import SeededRng

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "sample_id",
    "attack",
    "transform",
    "rectified",
    "k",
    "eps",
    "clean_pred",
    "attacked",
    "adv_pred",
    "success",
    "iterations",
    "linf_dist",
    "final_loss",
    "constraint",
    "seed",
]

AttackFn = Callable[[np.ndarray, int, SeededRng], AttackResult]


@dataclass(frozen=True)
class Evaluation:
    clean_accuracy: float
    attacked_accuracy: float
    success_rate: float
    table: pd.DataFrame

    @property
    def n(self) -> int:
        return len(self.table)

    def linf_quantile(self, q: float) -> float:
        """Quantile of l-inf distances over the samples that were attacked."""
        attacked = self.table[self.table["attacked"]]
        if attacked.empty:
            return 0.0
        return float(np.quantile(attacked["linf_dist"].to_numpy(), q))

    @property
    def mean_iterations(self) -> float:
        return float(self.table["iterations"].mean()) if self.n else 0.0

    @property
    def mean_linf(self) -> float:
        return float(self.table["linf_dist"].mean()) if self.n else 0.0


def evaluate_attack(
    model: Classifier,
    X,
    y,
    attack: AttackFn,
    seed: int = 0,
    name: str = "attack",
    transform: str = "",
    rectified: bool = False,
    k: int | None = None,
    eps: float | None = None,
    progress: bool = False,
) -> Evaluation:
    """
    Run ``attack(x, label, rng)`` on every correctly classified row of X.

    The attacked accuracy is the fraction of rows still classified correctly
    afterwards; the success rate is taken over rows that started correct.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        logger.warning("attack %s evaluated on an empty slice; accuracy is vacuously 1.0", name)
        return Evaluation(1.0, 1.0, 0.0, pd.DataFrame(columns=RESULT_COLUMNS))

    root = SeededRng(seed)
    clean_idx = model.predict(X)
    rows = []
    for i in tqdm(range(n), desc=name, disable=not progress):
        clean_label = int(index_to_label(clean_idx[i]))
        sample_rng = root.spawn(i)
        if clean_idx[i] != label_to_index(y[i]):
            row = dict(
                attacked=False,
                adv_pred=clean_label,
                success=True,
                iterations=0,
                linf_dist=0.0,
                final_loss=float("nan"),
                constraint="none",
            )
        else:
            result = attack(X[i], int(y[i]), sample_rng)
            row = dict(
                attacked=True,
                adv_pred=result.adversarial_label,
                success=result.success,
                iterations=result.iterations_used,
                linf_dist=result.linf_distance,
                final_loss=result.final_loss,
                constraint=result.constraint,
            )
        rows.append(
            dict(
                sample_id=i,
                attack=name,
                transform=transform,
                rectified=rectified,
                k=k,
                eps=eps,
                clean_pred=clean_label,
                seed=sample_rng.seed,
                **row,
            )
        )

    table = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    clean_correct = clean_idx == label_to_index(y)
    clean_accuracy = float(np.mean(clean_correct))
    attacked_accuracy = float(1.0 - table["success"].mean())
    started = int(clean_correct.sum())
    success_rate = float(table.loc[clean_correct, "success"].mean()) if started else 0.0
    logger.info(
        "%s: clean accuracy %.4f, attacked accuracy %.4f over %d samples",
        name,
        clean_accuracy,
        attacked_accuracy,
        n,
    )
    return Evaluation(clean_accuracy, attacked_accuracy, success_rate, table)
