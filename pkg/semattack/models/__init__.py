"""Target classifiers, their gradients and training."""

from __future__ import annotations

import numpy as np

from semattack.models.adam import AdamState, adam_step
from semattack.models.base import Classifier
from semattack.models.checkpoint import load_checkpoint, save_checkpoint
from semattack.models.linear import LinearModel, fit_class_mean_direction
from semattack.models.losses import (
    CROSS_ENTROPY,
    CW,
    LOSS_KINDS,
    cross_entropy,
    cw_loss,
    cw_objective,
    label_to_index,
    loss_grad,
    loss_value,
    predict_index,
)
from semattack.models.mlp import TwoLayerMlp
from semattack.models.training import EpochMetrics, accuracy, parameter_gradients, train


def forward_logits(model: Classifier, x) -> np.ndarray:
    return model.logits(x)


def loss_and_input_gradient(
    model: Classifier, x, loss_kind: str, true_idx: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss value, logits and analytic d loss / d x for a single input."""
    X, _ = model._batch(x)
    logits, cache = model.forward(X)
    dlogits = loss_grad(loss_kind, logits[0], true_idx)
    dX, _ = model.backward(cache, dlogits[None, :])
    return loss_value(loss_kind, logits[0], true_idx), logits[0], dX[0]


def input_gradient(model: Classifier, x, loss_kind: str, true_idx: int) -> np.ndarray:
    return loss_and_input_gradient(model, x, loss_kind, true_idx)[2]


__all__ = [
    "AdamState",
    "Classifier",
    "CROSS_ENTROPY",
    "CW",
    "EpochMetrics",
    "LOSS_KINDS",
    "LinearModel",
    "TwoLayerMlp",
    "accuracy",
    "adam_step",
    "cross_entropy",
    "cw_loss",
    "cw_objective",
    "fit_class_mean_direction",
    "forward_logits",
    "input_gradient",
    "label_to_index",
    "load_checkpoint",
    "loss_and_input_gradient",
    "parameter_gradients",
    "predict_index",
    "save_checkpoint",
    "train",
]
