import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semattack.errors import DimensionError, InvalidParameterError, InvalidRankError
from semattack.tensor_math import (
    SeededRng,
    as_vector,
    check_orthonormal,
    entrywise_abs_sum,
    gaussian_vector,
    load_basis,
    matvec,
    norm_linf,
    op_norm_inf_to_one,
    orthonormality_error,
    random_orthonormal,
)


def _brute_force_norm(a):
    return max(
        np.abs(a @ np.array(signs)).sum()
        for signs in itertools.product((-1.0, 1.0), repeat=a.shape[1])
    )


class TestSeededRng:
    def test_same_seed_same_draws(self):
        np.testing.assert_array_equal(SeededRng(7).normal(5), SeededRng(7).normal(5))

    def test_spawned_streams_are_independent_of_parent_use(self):
        parent = SeededRng(7)
        first = parent.spawn(3).normal(4)
        parent.normal(100)
        np.testing.assert_array_equal(first, parent.spawn(3).normal(4))

    def test_spawn_keys_differ(self):
        parent = SeededRng(7)
        assert parent.spawn(0).seed != parent.spawn(1).seed
        assert not np.array_equal(parent.spawn(0).normal(3), parent.spawn(1).normal(3))


class TestRandomOrthonormal:
    @pytest.mark.parametrize("d,k", [(1, 1), (5, 3), (100, 10), (20, 20)])
    def test_columns_are_orthonormal(self, d, k):
        u = random_orthonormal(d, k, SeededRng(0))
        assert u.shape == (d, k)
        assert orthonormality_error(u) < 1e-12

    def test_prefixes_are_nested(self):
        small = random_orthonormal(50, 5, SeededRng(11))
        large = random_orthonormal(50, 20, SeededRng(11))
        np.testing.assert_allclose(small, large[:, :5], atol=1e-12)

    @pytest.mark.parametrize("k", [0, 6])
    def test_rank_out_of_range(self, k):
        with pytest.raises(InvalidRankError):
            random_orthonormal(5, k, SeededRng(0))

    def test_check_orthonormal_rejects_scaled_columns(self):
        with pytest.raises(InvalidParameterError):
            check_orthonormal(2.0 * np.eye(3))

    def test_load_basis(self, tmp_path):
        path = tmp_path / "basis.json"
        path.write_text('{"U": [[1, 0], [0, 1], [0, 0]]}')
        u = load_basis(path, d=3)
        assert u.shape == (3, 2)
        with pytest.raises(DimensionError):
            load_basis(path, d=4)


class TestOperatorNorm:
    def test_matches_brute_force_on_random_matrices(self):
        rng = SeededRng(1)
        for shape in [(3, 4), (7, 2), (10, 10)]:
            a = rng.normal(shape)
            result = op_norm_inf_to_one(a)
            assert result.exact
            assert result.value == pytest.approx(_brute_force_norm(a), rel=1e-12)

    def test_transpose_has_the_same_norm(self):
        a = SeededRng(2).normal((4, 9))
        assert op_norm_inf_to_one(a).value == pytest.approx(op_norm_inf_to_one(a.T).value)

    def test_tall_orthonormal_basis_is_enumerated_over_columns(self):
        u = random_orthonormal(100, 10, SeededRng(0))
        result = op_norm_inf_to_one(u)
        assert result.exact
        # Between the column l1 norms and the entrywise sum.
        assert np.abs(u).sum(axis=0).max() <= result.value <= entrywise_abs_sum(u) + 1e-12

    def test_large_matrix_falls_back_to_entrywise_bound(self):
        a = SeededRng(3).normal((30, 30))
        result = op_norm_inf_to_one(a)
        assert not result.exact
        assert result.value == pytest.approx(entrywise_abs_sum(a))

    def test_empty_matrix(self):
        with pytest.raises(DimensionError):
            op_norm_inf_to_one(np.zeros((0, 3)))

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 6),
        st.integers(1, 6),
        st.integers(0, 2**32 - 1),
    )
    def test_norm_dominates_every_box_vector(self, rows, cols, seed):
        rng = SeededRng(seed)
        a = rng.normal((rows, cols))
        v = rng.uniform(-1.0, 1.0, cols)
        assert np.abs(a @ v).sum() <= op_norm_inf_to_one(a).value + 1e-9


class TestValidation:
    def test_as_vector_rejects_nan(self):
        with pytest.raises(InvalidParameterError):
            as_vector([1.0, np.nan])

    def test_as_vector_rejects_wrong_dimension(self):
        with pytest.raises(DimensionError):
            as_vector([1.0, 2.0], dim=3)

    def test_matvec_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matvec(np.eye(3), np.ones(2))

    def test_norm_linf_of_empty_vector(self):
        assert norm_linf(np.array([])) == 0.0

    def test_gaussian_vector_with_zero_sigma_is_the_mean(self):
        mean = np.array([1.0, -2.0])
        np.testing.assert_array_equal(gaussian_vector(mean, 0.0, SeededRng(0)), mean)

    def test_gaussian_vector_rejects_negative_sigma(self):
        with pytest.raises(InvalidParameterError):
            gaussian_vector(np.zeros(2), -1.0, SeededRng(0))
