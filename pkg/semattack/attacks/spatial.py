"""Grid search over rotations and translations."""

from __future__ import annotations

import logging

import numpy as np

from semattack.attacks.base import AffineGrid, AttackResult, classify
from semattack.models import Classifier, cross_entropy
from semattack.models.losses import label_to_index
from semattack.tensor_math import as_vector
from semattack.transforms import AFFINE_SPATIAL, TransformSpec, transform_forward

logger = logging.getLogger(__name__)


def spatial_grid_attack(
    model: Classifier, x, true_label: int, grid: AffineGrid | None = None
) -> AttackResult:
    """
    Evaluate every (rotation, shift-x, shift-y) of the grid and return the
    transform with the worst cross-entropy. The first grid point wins ties.
    """
    grid = grid if grid is not None else AffineGrid()
    spec = TransformSpec(kind=AFFINE_SPATIAL, d=model.d)
    x = as_vector(x, dim=model.d, name="x")
    true_idx = int(label_to_index(true_label))
    best_loss, best_delta, best_x = -np.inf, None, None
    points = grid.points()
    for point in points:
        delta = np.asarray(point, dtype=np.float64)
        x_tilde = transform_forward(spec, x, delta)
        loss = cross_entropy(model.logits(x_tilde), true_idx)
        if loss > best_loss:
            best_loss, best_delta, best_x = loss, delta, x_tilde
    logger.debug("spatial grid: worst point %s with loss %.4g", best_delta, best_loss)
    return classify(model, x, best_x, true_label, best_delta, len(points), best_loss)
