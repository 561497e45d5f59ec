"""
Adversarial parameter optimization.

The attack searches the parameters of a differentiable transform rather than
the pixels: each iteration evaluates f(G(x, delta)), back-propagates the
adversarial loss through the classifier and then the transform, takes an Adam
step on the parameters and projects them back onto the feasible set. It stops
as soon as the prediction changes, the loss reaches zero or the iteration
budget runs out.
"""

from __future__ import annotations

import logging

import numpy as np

from semattack.attacks.base import AttackConfig, AttackResult, classify
from semattack.errors import DimensionError, UnsupportedTransformError
from semattack.models import CROSS_ENTROPY, AdamState, Classifier, adam_step, predict_index
from semattack.models import loss_and_input_gradient
from semattack.models.losses import label_to_index
from semattack.tensor_math import as_vector
from semattack.transforms import (
    TransformSpec,
    binding_constraints,
    decode_params,
    decode_vjp,
    project_params,
    transform_forward,
    transform_vjp,
)

logger = logging.getLogger(__name__)


def _objective(model, spec, x, params, loss_kind, true_idx):
    """Minimized loss, adversarial input, prediction and gradient w.r.t. params."""
    delta = decode_params(spec, params)
    x_tilde = transform_forward(spec, x, delta)
    loss, logits, grad_x = loss_and_input_gradient(model, x_tilde, loss_kind, true_idx)
    grad = decode_vjp(spec, params, transform_vjp(spec, x, delta, grad_x))
    if loss_kind == CROSS_ENTROPY:
        # Cross-entropy is maximized, so descend on its negative.
        grad = -grad
    return loss, x_tilde, predict_index(logits, reference=true_idx), grad


def semantic_attack(
    model: Classifier,
    spec: TransformSpec,
    x,
    true_label: int,
    cfg: AttackConfig,
) -> AttackResult:
    if not spec.differentiable:
        raise UnsupportedTransformError(
            f"{spec.kind} cannot be optimized by gradient; use the grid search attack"
        )
    if spec.d != model.d:
        raise DimensionError(f"transform acts on d={spec.d} but the model expects d={model.d}")
    x = as_vector(x, dim=spec.d, name="x")
    true_idx = int(label_to_index(true_label))
    eps_spec = cfg.budgeted(spec)

    params = project_params(eps_spec, eps_spec.identity_params(), x)
    adam = AdamState(lr=cfg.lr)
    loss, x_tilde, pred, grad = _objective(model, eps_spec, x, params, cfg.loss, true_idx)
    iterations = 0
    while pred == true_idx and iterations < cfg.max_iter:
        if cfg.loss != CROSS_ENTROPY and loss == 0.0:
            break
        state = {"params": params}
        adam_step(adam, state, {"params": grad})
        params = project_params(eps_spec, state["params"], x)
        iterations += 1
        loss, x_tilde, pred, grad = _objective(model, eps_spec, x, params, cfg.loss, true_idx)
        logger.debug("iteration %d: loss %.6g", iterations, loss)

    return classify(
        model,
        x,
        x_tilde,
        true_label,
        delta=decode_params(eps_spec, params),
        iterations=iterations,
        final_loss=loss,
        constraint=binding_constraints(eps_spec, params, x),
    )


def attack_gradient(model: Classifier, spec: TransformSpec, x, params, loss_kind: str, true_label: int) -> np.ndarray:
    """Gradient of the minimized attack loss with respect to the optimized vector."""
    x = as_vector(x, dim=spec.d, name="x")
    params = as_vector(params, dim=spec.param_count, name="params")
    return _objective(model, spec, x, params, loss_kind, int(label_to_index(true_label)))[3]
