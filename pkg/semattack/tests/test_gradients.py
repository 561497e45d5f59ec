"""Analytic gradients of loss(f(G(x, delta))) against central differences."""

import numpy as np
import pytest

from semattack.models import CROSS_ENTROPY, CW, LinearModel, TwoLayerMlp, loss_and_input_gradient
from semattack.tensor_math import SeededRng, random_orthonormal
from semattack.transforms import (
    PIXEL_ADDITIVE,
    RANK_MULTIPLICATIVE,
    SUBSPACE_ADDITIVE,
    TransformSpec,
    decode_params,
    decode_vjp,
    pre_activation,
    transform_forward,
    transform_vjp,
)

CASES = 100
STEP = 1e-5
RTOL = 1e-4
# Inputs whose ReLU, rectifier or hinge arguments come closer than this to zero are redrawn.
KINK_MARGIN = 1e-2
MAX_DRAWS = 200


def _case(index):
    """Deterministic (model, spec, x, optimized vector, loss, class) for one case index."""
    model_kind = ("mlp", "linear")[index % 2]
    kind = (PIXEL_ADDITIVE, SUBSPACE_ADDITIVE, RANK_MULTIPLICATIVE)[(index // 2) % 3]
    rectified = (index // 6) % 2 == 1
    encoded = kind != PIXEL_ADDITIVE and (index // 12) % 2 == 1
    loss = (CROSS_ENTROPY, CW)[(index // 24) % 2]

    rng = SeededRng(1000).spawn(index)
    d = int(rng.integers(4, 10))
    k = int(rng.integers(1, d + 1))
    model = (
        TwoLayerMlp.initialize(d, 8, rng)
        if model_kind == "mlp"
        else LinearModel.initialize(d, rng)
    )
    U = random_orthonormal(d, k, rng) if kind != PIXEL_ADDITIVE else None
    readout = (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(1.0, 2.0))) if encoded else (0.0, 1.0)
    spec = TransformSpec(kind=kind, d=d, U=U, rectified=rectified, encoded=encoded, readout=readout)
    true_idx = int(rng.integers(0, 2))

    for _ in range(MAX_DRAWS):
        x = rng.normal(d)
        if encoded:
            low, high = spec.box
            params = rng.uniform(low + 0.5, high - 0.5, spec.param_count)
        else:
            params = spec.identity_delta() + 0.5 * rng.normal(spec.param_count)
        if _away_from_kinks(model, spec, x, params, loss, true_idx):
            return model, spec, x, params, loss, true_idx
    raise AssertionError(f"case {index} found no input away from the kinks")


def _away_from_kinks(model, spec, x, params, loss, true_idx):
    delta = decode_params(spec, params)
    if spec.rectified and np.min(np.abs(pre_activation(spec, x, delta))) < KINK_MARGIN:
        return False
    x_tilde = transform_forward(spec, x, delta)
    if isinstance(model, TwoLayerMlp) and np.min(np.abs(model.W1 @ x_tilde + model.b1)) < KINK_MARGIN:
        return False
    logits = model.logits(x_tilde)
    return not (loss == CW and abs(logits[0] - logits[1]) < KINK_MARGIN)


def _loss(model, z, loss, true_idx):
    return loss_and_input_gradient(model, z, loss, true_idx)[0]


def _central_difference(f, point):
    grad = np.zeros_like(point)
    for j in range(point.shape[0]):
        e = np.zeros_like(point)
        e[j] = STEP
        grad[j] = (f(point + e) - f(point - e)) / (2 * STEP)
    return grad


def _assert_close(analytic, numeric):
    error = np.linalg.norm(analytic - numeric)
    assert error <= RTOL * max(np.linalg.norm(numeric), 1e-8), (analytic, numeric)


@pytest.mark.parametrize("index", range(CASES))
def test_parameter_gradient(index):
    model, spec, x, params, loss, true_idx = _case(index)
    delta = decode_params(spec, params)
    _, _, grad_x = loss_and_input_gradient(model, transform_forward(spec, x, delta), loss, true_idx)
    analytic = decode_vjp(spec, params, transform_vjp(spec, x, delta, grad_x))

    def objective(p):
        return _loss(model, transform_forward(spec, x, decode_params(spec, p)), loss, true_idx)

    _assert_close(analytic, _central_difference(objective, params))


@pytest.mark.parametrize("index", range(CASES))
def test_input_gradient(index):
    model, spec, x, params, loss, true_idx = _case(index)
    x_tilde = transform_forward(spec, x, decode_params(spec, params))
    _, _, analytic = loss_and_input_gradient(model, x_tilde, loss, true_idx)
    numeric = _central_difference(lambda z: _loss(model, z, loss, true_idx), x_tilde)
    _assert_close(analytic, numeric)


def test_cases_cover_every_variant():
    seen = set()
    for index in range(CASES):
        model, spec, _, _, loss, _ = _case(index)
        seen.add((model.kind, spec.kind, spec.rectified, spec.encoded, loss))
    assert {kind for _, kind, _, _, _ in seen} == {PIXEL_ADDITIVE, SUBSPACE_ADDITIVE, RANK_MULTIPLICATIVE}
    assert {(m, r) for m, _, r, _, _ in seen} == {("mlp", False), ("mlp", True), ("linear", False), ("linear", True)}
    assert any(encoded for _, _, _, encoded, _ in seen)
    assert {loss for *_, loss in seen} == {CROSS_ENTROPY, CW}
