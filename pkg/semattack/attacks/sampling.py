"""Worst-of-s random sampling over a transform's parameter box."""

from __future__ import annotations

import numpy as np

from semattack.attacks.base import AttackConfig, AttackResult, classify
from semattack.models import Classifier, cross_entropy
from semattack.models.losses import label_to_index
from semattack.tensor_math import SeededRng, as_vector
from semattack.transforms import (
    TransformSpec,
    binding_constraints,
    decode_params,
    project_params,
    transform_forward,
)


def worst_of_s_random(
    model: Classifier,
    spec: TransformSpec,
    x,
    true_label: int,
    cfg: AttackConfig,
    rng: SeededRng | None = None,
) -> AttackResult:
    """
    Draw ``cfg.samples_s`` parameter vectors uniformly in the box, project
    them onto the feasible set and keep the draw with the largest
    cross-entropy. A spec without an eps budget takes ``cfg.eps_linf``.
    """
    spec = cfg.budgeted(spec)
    rng = rng if rng is not None else SeededRng(cfg.seed)
    x = as_vector(x, dim=spec.d, name="x")
    true_idx = int(label_to_index(true_label))
    low, high = spec.box
    best_loss, best_params, best_x = -np.inf, None, None
    for _ in range(cfg.samples_s):
        params = project_params(spec, rng.uniform(low, high, spec.param_count), x)
        x_tilde = transform_forward(spec, x, decode_params(spec, params))
        loss = cross_entropy(model.logits(x_tilde), true_idx)
        if loss > best_loss:
            best_loss, best_params, best_x = loss, params, x_tilde
    return classify(
        model,
        x,
        best_x,
        true_label,
        delta=decode_params(spec, best_params),
        iterations=cfg.samples_s,
        final_loss=best_loss,
        constraint=binding_constraints(spec, best_params, x),
    )
