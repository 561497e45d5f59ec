import json

import numpy as np
import pytest

from semattack.data import TwoComponentSpec, sample_two_component
from semattack.errors import DatasetError, DimensionError, InvalidParameterError
from semattack.models import (
    CROSS_ENTROPY,
    CW,
    AdamState,
    LinearModel,
    TwoLayerMlp,
    accuracy,
    adam_step,
    fit_class_mean_direction,
    input_gradient,
    load_checkpoint,
    loss_and_input_gradient,
    parameter_gradients,
    save_checkpoint,
    train,
)
from semattack.models.checkpoint import model_from_dict
from semattack.tensor_math import SeededRng

STEP = 1e-6


def _numeric_input_gradient(model, x, loss_kind, true_idx):
    grad = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = STEP
        plus = loss_and_input_gradient(model, x + e, loss_kind, true_idx)[0]
        minus = loss_and_input_gradient(model, x - e, loss_kind, true_idx)[0]
        grad[j] = (plus - minus) / (2 * STEP)
    return grad


class TestInputGradients:
    def setup_method(self):
        rng = SeededRng(0)
        self.mlp = TwoLayerMlp.initialize(6, 8, rng)
        self.linear = LinearModel.initialize(6, rng)
        self.x = rng.normal(6)

    @pytest.mark.parametrize("loss_kind", [CROSS_ENTROPY, CW])
    @pytest.mark.parametrize("true_idx", [0, 1])
    def test_mlp_matches_finite_differences(self, loss_kind, true_idx):
        analytic = input_gradient(self.mlp, self.x, loss_kind, true_idx)
        numeric = _numeric_input_gradient(self.mlp, self.x, loss_kind, true_idx)
        np.testing.assert_allclose(analytic, numeric, atol=1e-5)

    @pytest.mark.parametrize("true_idx", [0, 1])
    def test_linear_matches_finite_differences(self, true_idx):
        analytic = input_gradient(self.linear, self.x, CROSS_ENTROPY, true_idx)
        numeric = _numeric_input_gradient(self.linear, self.x, CROSS_ENTROPY, true_idx)
        np.testing.assert_allclose(analytic, numeric, atol=1e-6)

    def test_wrong_input_dimension(self):
        with pytest.raises(DimensionError):
            self.mlp.logits(np.zeros(5))


class TestParameterGradients:
    def test_mlp_weight_gradient_matches_finite_differences(self):
        rng = SeededRng(1)
        model = TwoLayerMlp.initialize(4, 5, rng)
        X = rng.normal((10, 4))
        y = np.where(rng.uniform(0, 1, 10) < 0.5, 1, -1)
        _, grads = parameter_gradients(model, X, y)
        for name in ("W1", "b2"):
            value = model.params()[name]
            index = (0,) * value.ndim
            original = value[index]
            value[index] = original + STEP
            plus, _ = parameter_gradients(model, X, y)
            value[index] = original - STEP
            minus, _ = parameter_gradients(model, X, y)
            value[index] = original
            assert grads[name][index] == pytest.approx((plus - minus) / (2 * STEP), abs=1e-5)


class TestAdam:
    def test_first_step_moves_each_coordinate_by_lr(self):
        params = {"w": np.array([1.0, -2.0, 0.5])}
        grads = {"w": np.array([0.3, -4.0, 1e-3])}
        adam_step(AdamState(lr=0.01), params, grads)
        np.testing.assert_allclose(params["w"], [0.99, -1.99, 0.49], atol=1e-6)

    def test_zero_gradient_leaves_parameters(self):
        params = {"w": np.array([1.0, 2.0])}
        adam_step(AdamState(lr=0.1), params, {"w": np.zeros(2)})
        np.testing.assert_array_equal(params["w"], [1.0, 2.0])

    def test_mismatched_gradients(self):
        with pytest.raises(DimensionError):
            adam_step(AdamState(), {"w": np.zeros(2)}, {"w": np.zeros(3)})

    def test_rejects_non_positive_lr(self):
        with pytest.raises(InvalidParameterError):
            AdamState(lr=0.0)

    def test_fresh_state_resets_moments(self):
        state = AdamState(lr=0.05)
        adam_step(state, {"w": np.zeros(1)}, {"w": np.ones(1)})
        fresh = state.fresh()
        assert fresh.t == 0 and fresh.first_moment == {} and fresh.lr == 0.05


class TestTraining:
    def test_mlp_learns_the_digit_mixture(self, small_dataset, trained_mlp):
        X_test, y_test = small_dataset.subset("test")
        assert accuracy(trained_mlp, X_test, y_test) >= 0.75

    def test_training_is_deterministic(self, small_dataset):
        models = []
        for _ in range(2):
            model = TwoLayerMlp.initialize(small_dataset.d, 8, SeededRng(0))
            train(model, small_dataset, 2, AdamState(lr=0.01), SeededRng(1))
            models.append(model)
        assert models[0] == models[1]

    def test_linear_model_stays_unit_norm(self, small_dataset):
        model = LinearModel.initialize(small_dataset.d, SeededRng(0))
        _, history = train(model, small_dataset, 2, AdamState(lr=0.05), SeededRng(1))
        assert np.linalg.norm(model.w_hat) == pytest.approx(1.0)
        assert [m.epoch for m in history] == [1, 2]

    def test_empty_accuracy_is_vacuous(self):
        model = LinearModel(np.ones(3))
        assert accuracy(model, np.empty((0, 3)), np.empty(0)) == 1.0


class TestClassMeanDirection:
    def test_recovers_theta_direction(self):
        theta = np.array([3.0, 0.0, 0.0, 0.0])
        dataset = sample_two_component(TwoComponentSpec(theta, 0.5), 2000, SeededRng(0))
        model = fit_class_mean_direction(dataset.X, dataset.y)
        assert np.linalg.norm(model.w_hat) == pytest.approx(1.0)
        assert model.w_hat[0] > 0.99

    def test_needs_both_classes(self):
        with pytest.raises(InvalidParameterError):
            fit_class_mean_direction(np.ones((3, 2)), np.ones(3))

    def test_linear_logits_follow_the_sign_rule(self):
        model = LinearModel([2.0, 0.0])
        np.testing.assert_allclose(model.logits(np.array([1.5, 9.0])), [1.5, -1.5])
        assert model.predict(np.array([[-1.0, 0.0]]))[0] == 1


class TestCheckpoint:
    @pytest.mark.parametrize("kind", ["linear", "mlp"])
    def test_checkpoint_reproduces_logits(self, tmp_path, kind):
        rng = SeededRng(2)
        model = LinearModel.initialize(5, rng) if kind == "linear" else TwoLayerMlp.initialize(5, 3, rng)
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "model.json"))
        x = rng.normal((4, 5))
        np.testing.assert_allclose(loaded.logits(x), model.logits(x), rtol=1e-12, atol=1e-12)

    def test_zero_linear_weights_are_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        save_checkpoint(LinearModel([1.0, 0.0, 0.0]), path)
        document = json.loads(path.read_text())
        document["weights"]["w_hat"] = [0.0, 0.0, 0.0]
        path.write_text(json.dumps(document))
        with pytest.raises(DatasetError, match="w_hat must be non-zero"):
            load_checkpoint(path)

    def test_unknown_kind(self):
        with pytest.raises(DatasetError):
            model_from_dict({"kind": "forest", "weights": {}})
