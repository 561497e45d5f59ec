"""Pixel-space l-inf baselines: FGSM, PGD and Carlini-Wagner l-inf."""

from __future__ import annotations

import logging

import numpy as np

from semattack.attacks.base import AttackResult, classify
from semattack.errors import InvalidParameterError
from semattack.models import CROSS_ENTROPY, CW, Classifier, loss_and_input_gradient, predict_index
from semattack.models.losses import label_to_index
from semattack.tensor_math import SeededRng, as_vector

logger = logging.getLogger(__name__)


def _check_eps(eps: float) -> None:
    if eps < 0:
        raise InvalidParameterError(f"eps must be non-negative, got {eps}")


def _clip_valid(z: np.ndarray, valid_range: tuple[float, float] | None) -> np.ndarray:
    return z if valid_range is None else np.clip(z, *valid_range)


def _project_ball(z: np.ndarray, x: np.ndarray, eps: float, valid_range) -> np.ndarray:
    return _clip_valid(np.clip(z, x - eps, x + eps), valid_range)


def fgsm_attack(
    model: Classifier,
    x,
    true_label: int,
    eps: float,
    valid_range: tuple[float, float] | None = None,
) -> AttackResult:
    """One signed gradient step of size eps on the cross-entropy."""
    _check_eps(eps)
    x = as_vector(x, dim=model.d, name="x")
    true_idx = int(label_to_index(true_label))
    _, _, grad = loss_and_input_gradient(model, x, CROSS_ENTROPY, true_idx)
    x_adv = _clip_valid(x + eps * np.sign(grad), valid_range)
    loss, _, _ = loss_and_input_gradient(model, x_adv, CROSS_ENTROPY, true_idx)
    return classify(model, x, x_adv, true_label, x_adv - x, 1, loss)


def pgd_attack(
    model: Classifier,
    x,
    true_label: int,
    eps: float,
    step: float,
    iters: int,
    rng: SeededRng | None = None,
    restarts: int = 1,
    loss: str = CROSS_ENTROPY,
    valid_range: tuple[float, float] | None = None,
) -> AttackResult:
    """
    Projected signed-gradient ascent inside the l-inf ball of radius eps.

    Each restart starts from a uniform point of the ball (from x itself when
    ``rng`` is None) and stops early once the prediction changes. The
    restart with the highest final loss is returned.
    """
    _check_eps(eps)
    x = as_vector(x, dim=model.d, name="x")
    true_idx = int(label_to_index(true_label))
    sign = 1.0 if loss == CROSS_ENTROPY else -1.0
    best = None
    for _ in range(restarts):
        z = x.copy() if rng is None else _project_ball(x + rng.uniform(-eps, eps, x.shape), x, eps, valid_range)
        value, logits, grad = loss_and_input_gradient(model, z, loss, true_idx)
        iterations = 0
        while predict_index(logits, reference=true_idx) == true_idx and iterations < iters:
            z = _project_ball(z + sign * step * np.sign(grad), x, eps, valid_range)
            iterations += 1
            value, logits, grad = loss_and_input_gradient(model, z, loss, true_idx)
        result = classify(model, x, z, true_label, z - x, iterations, value)
        if best is None or (result.success, sign * result.final_loss) > (
            best.success,
            sign * best.final_loss,
        ):
            best = result
        if best.success:
            break
    return best


def cw_linf_attack(
    model: Classifier,
    x,
    true_label: int,
    eps: float,
    step: float,
    iters: int,
    valid_range: tuple[float, float] | None = None,
) -> AttackResult:
    """
    Projected signed-gradient descent on the Carlini-Wagner objective.

    A candidate step is accepted only if it does not increase the objective;
    otherwise the step size is halved. The accepted iterates therefore have a
    non-increasing loss, and the search ends when the loss reaches zero.
    """
    _check_eps(eps)
    x = as_vector(x, dim=model.d, name="x")
    true_idx = int(label_to_index(true_label))
    z = x.copy()
    value, _, grad = loss_and_input_gradient(model, z, CW, true_idx)
    iterations = 0
    while value > 0.0 and iterations < iters:
        iterations += 1
        candidate = _project_ball(z - step * np.sign(grad), x, eps, valid_range)
        candidate_value, _, candidate_grad = loss_and_input_gradient(model, candidate, CW, true_idx)
        if candidate_value <= value:
            z, value, grad = candidate, candidate_value, candidate_grad
        else:
            step *= 0.5
        logger.debug("cw-linf iteration %d: loss %.6g step %.3g", iterations, value, step)
    return classify(model, x, z, true_label, z - x, iterations, value)
