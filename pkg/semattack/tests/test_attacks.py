import numpy as np
import pytest

from semattack.attacks import (
    RESULT_COLUMNS,
    AffineGrid,
    AttackConfig,
    attack_gradient,
    cw_linf_attack,
    evaluate_attack,
    fgsm_attack,
    pgd_attack,
    semantic_attack,
    spatial_grid_attack,
    worst_of_s_random,
)
from semattack.errors import DimensionError, InvalidParameterError, UnsupportedTransformError
from semattack.models import (
    CROSS_ENTROPY,
    CW,
    cross_entropy,
    cw_objective,
    loss_and_input_gradient,
    predict_index,
)
from semattack.tensor_math import SeededRng, random_orthonormal
from semattack.transforms import (
    AFFINE_SPATIAL,
    PIXEL_ADDITIVE,
    RANK_MULTIPLICATIVE,
    SUBSPACE_ADDITIVE,
    TransformSpec,
    budget_distance,
    project_params,
    transform_forward,
)

STEP = 1e-6


def _x(first):
    return np.array([first, 0.2, -0.1, 0.4])


def _axis_spec(box=(-3.0, 3.0), eps_linf=None, kind=SUBSPACE_ADDITIVE):
    # Basis spanning the first two pixels; the linear fixture only reads the first.
    return TransformSpec(kind=kind, d=4, U=np.eye(4)[:, :2], box=box, eps_linf=eps_linf)


class TestSemanticAttack:
    @pytest.mark.parametrize("loss", [CW, CROSS_ENTROPY])
    def test_flips_a_linear_classifier(self, linear_model, loss):
        result = semantic_attack(linear_model, _axis_spec(), _x(1.05), 1, AttackConfig(loss=loss, lr=0.1))
        assert result.success
        assert result.adversarial_label == -1
        assert result.x_adv[0] < 0
        assert 0 < result.iterations_used < 500

    def test_box_too_small_to_flip(self, linear_model):
        cfg = AttackConfig(lr=0.1, max_iter=50)
        result = semantic_attack(linear_model, _axis_spec(box=(-0.5, 0.5)), _x(1.05), 1, cfg)
        assert not result.success
        assert result.iterations_used == 50
        assert result.constraint == "box"
        assert result.x_adv[0] == pytest.approx(0.55)

    def test_eps_budget_from_the_config(self, linear_model):
        cfg = AttackConfig(lr=0.1, max_iter=50, eps_linf=0.5)
        result = semantic_attack(linear_model, _axis_spec(), _x(1.05), 1, cfg)
        assert not result.success
        assert result.linf_distance <= 0.5 + 1e-9
        assert result.constraint == "eps_linf"

    @pytest.mark.parametrize("kind", [PIXEL_ADDITIVE, SUBSPACE_ADDITIVE])
    def test_zero_budget_leaves_the_input_alone(self, linear_model, kind):
        U = None if kind == PIXEL_ADDITIVE else np.eye(4)[:, :2]
        spec = TransformSpec(kind=kind, d=4, U=U, eps_linf=0.0)
        x = _x(0.3)
        result = semantic_attack(linear_model, spec, x, 1, AttackConfig(lr=0.1, max_iter=20))
        assert not result.success
        np.testing.assert_array_equal(result.x_adv, x)

    @pytest.mark.parametrize("eps", [0.1, 1.0, 10.0, None])
    def test_subspace_orthogonal_to_the_weights_never_flips(self, linear_model, eps):
        # The linear fixture reads only the first pixel; this basis never touches it.
        spec = TransformSpec(
            kind=SUBSPACE_ADDITIVE, d=4, U=np.eye(4)[:, 1:3], box=(-100.0, 100.0), eps_linf=eps
        )
        result = semantic_attack(linear_model, spec, _x(0.3), 1, AttackConfig(lr=0.5, max_iter=30))
        assert not result.success
        assert result.x_adv[0] == 0.3

    def test_misclassified_input_stops_immediately(self, linear_model):
        result = semantic_attack(linear_model, _axis_spec(), _x(-1.0), 1, AttackConfig())
        assert result.success
        assert result.iterations_used == 0

    def test_multiplicative_attack_respects_its_budget(self, trained_mlp, small_dataset):
        U = random_orthonormal(small_dataset.d, 4, SeededRng(1))
        spec = TransformSpec(kind=RANK_MULTIPLICATIVE, d=small_dataset.d, U=U, eps_linf=0.3)
        X, y = small_dataset.subset("test")
        for x, label in zip(X[:5], y[:5]):
            params_result = semantic_attack(trained_mlp, spec, x, int(label), AttackConfig(max_iter=50))
            identity = U @ (U.T @ x)
            assert np.max(np.abs(params_result.x_adv - identity)) <= 0.3 + 1e-9

    def test_spatial_spec_is_rejected(self, trained_mlp):
        spec = TransformSpec(kind=AFFINE_SPATIAL, d=16)
        with pytest.raises(UnsupportedTransformError):
            semantic_attack(trained_mlp, spec, np.zeros(16), 1, AttackConfig())

    def test_dimension_mismatch(self, linear_model):
        spec = TransformSpec(kind=SUBSPACE_ADDITIVE, d=9, U=np.eye(9)[:, :2])
        with pytest.raises(DimensionError):
            semantic_attack(linear_model, spec, np.zeros(9), 1, AttackConfig())


class TestAttackGradient:
    @pytest.mark.parametrize("loss", [CW, CROSS_ENTROPY])
    def test_matches_finite_differences(self, trained_mlp, small_dataset, loss):
        U = random_orthonormal(small_dataset.d, 3, SeededRng(2))
        spec = TransformSpec(kind=SUBSPACE_ADDITIVE, d=small_dataset.d, U=U)
        X, y = small_dataset.subset("test")
        x, label = X[0], int(y[0])
        true_idx = 0 if label == 1 else 1
        params = SeededRng(3).uniform(-0.2, 0.2, 3)

        def objective(p):
            logits = trained_mlp.logits(x + U @ p)
            if loss == CW:
                return cw_objective(logits, true_idx)
            return -cross_entropy(logits, true_idx)

        numeric = np.array(
            [(objective(params + STEP * e) - objective(params - STEP * e)) / (2 * STEP) for e in np.eye(3)]
        )
        analytic = attack_gradient(trained_mlp, spec, x, params, loss, label)
        np.testing.assert_allclose(analytic, numeric, atol=1e-5)


class TestPixelAttacks:
    def test_fgsm_takes_one_signed_step(self, linear_model):
        result = fgsm_attack(linear_model, _x(0.3), 1, 0.5)
        assert result.success
        np.testing.assert_allclose(result.x_adv, _x(-0.2))
        assert result.linf_distance == pytest.approx(0.5)

    def test_pgd_stays_in_the_ball(self, linear_model):
        result = pgd_attack(linear_model, _x(0.3), 1, 0.2, 0.05, 20, SeededRng(0), restarts=3)
        assert not result.success
        assert result.linf_distance <= 0.2 + 1e-12

    def test_pgd_flips_when_the_ball_allows(self, linear_model):
        result = pgd_attack(linear_model, _x(0.3), 1, 0.5, 0.125, 20)
        assert result.success
        assert result.linf_distance <= 0.5 + 1e-12

    def test_cw_linf_flips_within_budget(self, linear_model):
        result = cw_linf_attack(linear_model, _x(0.3), 1, 0.5, 0.125, 40)
        assert result.success
        assert result.final_loss == 0.0
        assert result.linf_distance <= 0.5 + 1e-12

    def test_single_pgd_step_from_the_input_is_fgsm(self, trained_mlp, small_dataset):
        X, y = small_dataset.subset("test")
        eps = 0.2
        compared = 0
        for x, label in zip(X[:10], y[:10]):
            true_idx = 0 if label == 1 else 1
            if predict_index(trained_mlp.logits(x), reference=true_idx) != true_idx:
                continue
            fgsm = fgsm_attack(trained_mlp, x, int(label), eps)
            pgd = pgd_attack(trained_mlp, x, int(label), eps, step=eps, iters=1)
            np.testing.assert_array_equal(pgd.x_adv, fgsm.x_adv)
            compared += 1
        assert compared > 0

    def test_cw_linf_loss_never_increases(self, trained_mlp, small_dataset):
        X, y = small_dataset.subset("test")
        x, label = X[2], int(y[2])
        true_idx = 0 if label == 1 else 1
        losses = [loss_and_input_gradient(trained_mlp, x, CW, true_idx)[0]]
        for iters in range(1, 16):
            losses.append(cw_linf_attack(trained_mlp, x, label, 0.3, 0.1, iters).final_loss)
        assert all(later <= earlier for earlier, later in zip(losses, losses[1:]))

    def test_negative_eps(self, linear_model):
        with pytest.raises(InvalidParameterError):
            fgsm_attack(linear_model, _x(0.3), 1, -0.1)

    def test_valid_range_is_respected(self, linear_model):
        result = fgsm_attack(linear_model, _x(0.3), 1, 0.5, valid_range=(0.0, 1.0))
        assert result.x_adv.min() >= 0.0 and result.x_adv.max() <= 1.0


class TestSampledAttacks:
    def test_worst_of_s_is_reproducible(self, trained_mlp, small_dataset):
        U = random_orthonormal(small_dataset.d, 4, SeededRng(4))
        spec = TransformSpec(kind=SUBSPACE_ADDITIVE, d=small_dataset.d, U=U, eps_linf=0.4)
        x, label = small_dataset.X[0], int(small_dataset.y[0])
        cfg = AttackConfig(samples_s=8)
        first = worst_of_s_random(trained_mlp, spec, x, label, cfg, SeededRng(5))
        second = worst_of_s_random(trained_mlp, spec, x, label, cfg, SeededRng(5))
        np.testing.assert_array_equal(first.x_adv, second.x_adv)
        assert first.iterations_used == 8
        assert budget_distance(spec, x, first.delta_star) <= 0.4 + 1e-9

    def _draws(self, spec, x, count, seed):
        rng = SeededRng(seed)
        low, high = spec.box
        return [project_params(spec, rng.uniform(low, high, spec.param_count), x) for _ in range(count)]

    def test_single_sample_is_one_draw(self, trained_mlp, small_dataset):
        U = random_orthonormal(small_dataset.d, 4, SeededRng(4))
        spec = TransformSpec(kind=SUBSPACE_ADDITIVE, d=small_dataset.d, U=U, eps_linf=0.4)
        x, label = small_dataset.X[0], int(small_dataset.y[0])
        result = worst_of_s_random(trained_mlp, spec, x, label, AttackConfig(samples_s=1), SeededRng(5))
        (params,) = self._draws(spec, x, 1, 5)
        np.testing.assert_array_equal(result.delta_star, params)
        np.testing.assert_array_equal(result.x_adv, transform_forward(spec, x, params))

    def test_worst_of_s_keeps_the_highest_loss(self, trained_mlp, small_dataset):
        U = random_orthonormal(small_dataset.d, 4, SeededRng(4))
        spec = TransformSpec(kind=RANK_MULTIPLICATIVE, d=small_dataset.d, U=U, eps_linf=0.4)
        x, label = small_dataset.X[3], int(small_dataset.y[3])
        true_idx = 0 if label == 1 else 1
        result = worst_of_s_random(trained_mlp, spec, x, label, AttackConfig(samples_s=6), SeededRng(7))
        losses = [
            cross_entropy(trained_mlp.logits(transform_forward(spec, x, params)), true_idx)
            for params in self._draws(spec, x, 6, 7)
        ]
        assert all(result.final_loss >= loss for loss in losses)
        assert result.final_loss == max(losses)

    def test_worst_of_s_takes_the_config_budget(self, trained_mlp, small_dataset):
        U = random_orthonormal(small_dataset.d, 4, SeededRng(4))
        spec = TransformSpec(kind=SUBSPACE_ADDITIVE, d=small_dataset.d, U=U)
        x, label = small_dataset.X[0], int(small_dataset.y[0])
        cfg = AttackConfig(samples_s=8, eps_linf=0.05)
        result = worst_of_s_random(trained_mlp, spec, x, label, cfg, SeededRng(5))
        assert budget_distance(spec, x, result.delta_star) <= 0.05 + 1e-9
        assert result.constraint in ("eps_linf", "both")

    def test_spatial_identity_grid_changes_nothing(self, trained_mlp, small_dataset):
        x, label = small_dataset.X[0], int(small_dataset.y[0])
        result = spatial_grid_attack(trained_mlp, x, label, AffineGrid.identity())
        np.testing.assert_array_equal(result.x_adv, x)
        assert result.iterations_used == 1

    def test_spatial_worst_point_is_at_least_the_identity_loss(self, trained_mlp, small_dataset):
        x, label = small_dataset.X[1], int(small_dataset.y[1])
        grid = AffineGrid(max_rotation=20.0, num_rotations=5, max_shift=1)
        assert grid.contains_identity()
        result = spatial_grid_attack(trained_mlp, x, label, grid)
        true_idx = 0 if label == 1 else 1
        assert result.final_loss >= cross_entropy(trained_mlp.logits(x), true_idx)
        assert result.iterations_used == len(grid.points())

    def test_grid_validation(self):
        with pytest.raises(InvalidParameterError):
            AffineGrid(max_rotation=200.0)


class TestEvaluation:
    def setup_method(self):
        self.X = np.stack([_x(1.05), _x(-1.0), _x(-2.0)])
        self.y = np.array([1, 1, -1])

    def test_counts_misclassified_samples_as_successes(self, linear_model):
        evaluation = evaluate_attack(
            linear_model,
            self.X,
            self.y,
            lambda x, label, rng: fgsm_attack(linear_model, x, label, 1.5),
            name="fgsm",
            eps=1.5,
        )
        assert evaluation.clean_accuracy == pytest.approx(2 / 3)
        assert evaluation.attacked_accuracy == pytest.approx(1 / 3)
        assert evaluation.success_rate == pytest.approx(0.5)
        table = evaluation.table
        assert list(table.columns) == RESULT_COLUMNS
        assert table["attacked"].tolist() == [True, False, True]
        assert table["success"].tolist() == [True, True, False]
        assert np.isnan(table["final_loss"].iloc[1])

    def test_per_sample_seeds_do_not_depend_on_order(self, linear_model):
        seen = []

        def attack(x, label, rng):
            seen.append(rng.seed)
            return fgsm_attack(linear_model, x, label, 0.1)

        full = evaluate_attack(linear_model, self.X, self.y, attack, seed=9)
        assert full.table["seed"].iloc[2] == seen[-1]
        again = evaluate_attack(linear_model, self.X, self.y, attack, seed=9)
        assert again.table["seed"].tolist() == full.table["seed"].tolist()

    def test_empty_slice_is_vacuous(self, linear_model):
        evaluation = evaluate_attack(
            linear_model, np.empty((0, 4)), np.empty(0), lambda x, label, rng: None
        )
        assert evaluation.clean_accuracy == 1.0 and evaluation.attacked_accuracy == 1.0
        assert evaluation.n == 0

    def test_linf_quantile_ignores_skipped_rows(self, linear_model):
        evaluation = evaluate_attack(
            linear_model,
            self.X,
            self.y,
            lambda x, label, rng: fgsm_attack(linear_model, x, label, 0.25),
        )
        assert evaluation.linf_quantile(0.0) == pytest.approx(0.25)
