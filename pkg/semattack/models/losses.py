"""
Losses on class logits and their closed-form logit gradients.

Labels are +1/-1 at the data boundary and class indices 0/1 inside models:
label +1 is index 0 and label -1 is index 1, so a linear model's logits
``(s, -s)`` predict index 0 exactly when ``sign(s) = +1``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_softmax, softmax

from semattack.errors import InvalidParameterError

CROSS_ENTROPY = "cross_entropy"
CW = "cw"
LOSS_KINDS = (CROSS_ENTROPY, CW)


def label_to_index(y):
    return (1 - np.asarray(y, dtype=np.int64)) // 2


def index_to_label(index):
    return 1 - 2 * np.asarray(index, dtype=np.int64)


def predict_index(logits: np.ndarray, reference: int | None = None) -> int:
    """
    Argmax with ties broken toward the lowest index.

    When ``reference`` is given and its logit is tied for the maximum, the
    reference index wins, so an exact tie never counts as a label change.
    """
    if reference is not None and logits[reference] >= np.max(logits):
        return int(reference)
    return int(np.argmax(logits))


def _check_index(logits: np.ndarray, true_idx: int) -> None:
    if logits.shape[-1] < 2:
        raise InvalidParameterError("losses need at least two classes")
    if not 0 <= true_idx < logits.shape[-1]:
        raise InvalidParameterError(
            f"class index {true_idx} out of range for {logits.shape[-1]} classes"
        )


def cross_entropy(logits: np.ndarray, true_idx) -> np.ndarray | float:
    """Softmax cross-entropy; works on one logit vector or a batch."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        _check_index(logits, int(true_idx))
        return float(-log_softmax(logits)[int(true_idx)])
    rows = np.arange(logits.shape[0])
    return -log_softmax(logits, axis=1)[rows, true_idx]


def cross_entropy_grad(logits: np.ndarray, true_idx) -> np.ndarray:
    """d CE / d logits = softmax(logits) - onehot(true_idx)."""
    logits = np.asarray(logits, dtype=np.float64)
    grad = softmax(logits, axis=-1)
    if logits.ndim == 1:
        grad[int(true_idx)] -= 1.0
    else:
        grad[np.arange(logits.shape[0]), true_idx] -= 1.0
    return grad


def _runner_up(logits: np.ndarray, true_idx: int) -> int:
    others = logits.copy()
    others[true_idx] = -np.inf
    return int(np.argmax(others))


def cw_loss(logits: np.ndarray, true_idx: int) -> float:
    """
    Misclassification margin max(0, max_{t != i} z_t - z_i).

    Zero exactly when the logit of class ``i`` is at least every other logit.
    """
    logits = np.asarray(logits, dtype=np.float64)
    _check_index(logits, true_idx)
    t = _runner_up(logits, true_idx)
    return float(max(0.0, logits[t] - logits[true_idx]))


def cw_objective(logits: np.ndarray, true_idx: int) -> float:
    """
    Untargeted Carlini-Wagner objective max(0, z_i - max_{t != i} z_t).

    Attacks minimize this. It is zero exactly when the input is misclassified
    or the true logit is tied with the best other logit.
    """
    logits = np.asarray(logits, dtype=np.float64)
    _check_index(logits, true_idx)
    t = _runner_up(logits, true_idx)
    return float(max(0.0, logits[true_idx] - logits[t]))


def cw_objective_grad(logits: np.ndarray, true_idx: int) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    grad = np.zeros_like(logits)
    t = _runner_up(logits, true_idx)
    if logits[true_idx] - logits[t] > 0:
        grad[true_idx] = 1.0
        grad[t] = -1.0
    return grad


def loss_value(kind: str, logits: np.ndarray, true_idx: int) -> float:
    if kind == CROSS_ENTROPY:
        return cross_entropy(logits, true_idx)
    if kind == CW:
        return cw_objective(logits, true_idx)
    raise InvalidParameterError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def loss_grad(kind: str, logits: np.ndarray, true_idx: int) -> np.ndarray:
    if kind == CROSS_ENTROPY:
        return cross_entropy_grad(logits, true_idx)
    if kind == CW:
        return cw_objective_grad(logits, true_idx)
    raise InvalidParameterError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
