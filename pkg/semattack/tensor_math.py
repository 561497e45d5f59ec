"""
Dense linear algebra, orthonormal bases, matrix norms and seeded sampling.

Everything here works on float64 numpy arrays. Vectors are 1-D and matrices
are 2-D row-major; helpers validate shapes and finiteness at the boundary so
the numeric modules above can assume well-formed input.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np

from semattack.errors import DimensionError, InvalidParameterError, InvalidRankError
from semattack.typing import ArrayLike, Matrix, Vector

logger = logging.getLogger(__name__)

# Largest dimension for which the inf->1 norm is computed by enumerating signs.
EXACT_ENUMERATION_LIMIT = 24
_ENUMERATION_CHUNK = 1 << 15
ORTHONORMAL_TOLERANCE = 1e-8


class SeededRng:
    """
    A reproducible random stream.

    Wraps a PCG64 ``numpy.random.Generator`` so that the same seed yields the
    same draws on every platform. Child streams for independent tasks (one per
    sample, one per grid cell) are derived with :meth:`spawn`, which hashes the
    parent seed together with the task key through ``SeedSequence``.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def spawn(self, *keys: int) -> "SeededRng":
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=tuple(int(k) for k in keys)
        )
        child = SeededRng.__new__(SeededRng)
        child.seed = int(sequence.generate_state(1, dtype=np.uint64)[0] >> 1)
        child._generator = np.random.Generator(np.random.PCG64(sequence))
        return child

    def normal(self, size=None) -> np.ndarray:
        return self._generator.standard_normal(size)

    def uniform(self, low, high, size=None) -> np.ndarray:
        return self._generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


class OperatorNorm(NamedTuple):
    value: float
    exact: bool


def as_vector(x: ArrayLike, dim: int | None = None, name: str = "vector") -> Vector:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {v.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError(f"{name} contains non-finite entries")
    return v


def as_matrix(
    a: ArrayLike,
    rows: int | None = None,
    cols: int | None = None,
    name: str = "matrix",
) -> Matrix:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"{name} has {m.shape[0]} rows, expected {rows}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"{name} has {m.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(m)):
        raise InvalidParameterError(f"{name} contains non-finite entries")
    return m


def matvec(a: Matrix, x: Vector) -> Vector:
    if a.shape[1] != x.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} matrix by {x.shape} vector")
    return a @ x


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a: Matrix) -> Matrix:
    return np.ascontiguousarray(a.T)


def dot(x: Vector, y: Vector) -> float:
    if x.shape != y.shape:
        raise DimensionError(f"dot of mismatched shapes {x.shape} and {y.shape}")
    return float(np.dot(x, y))


def norm_l1(x: Vector) -> float:
    return float(np.sum(np.abs(x)))


def norm_l2(x: Vector) -> float:
    return float(np.sqrt(np.dot(x, x)))


def norm_linf(x: Vector) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def clamp(x: np.ndarray, low, high) -> np.ndarray:
    return np.clip(x, low, high)


def _modified_gram_schmidt(a: Matrix) -> Matrix:
    q = np.array(a, dtype=np.float64, copy=True)
    _, cols = q.shape
    for j in range(cols):
        # Two passes against the accepted columns keep the loss of
        # orthogonality at machine precision.
        for _ in range(2):
            for i in range(j):
                q[:, j] -= np.dot(q[:, i], q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if norm == 0.0:
            raise InvalidRankError("Gaussian draw produced a rank-deficient matrix")
        q[:, j] /= norm
    return q


def random_orthonormal(d: int, k: int, rng: SeededRng) -> Matrix:
    """
    Draw a d x k matrix with orthonormal columns.

    Columns are obtained by modified Gram-Schmidt with re-orthogonalization on
    i.i.d. standard Gaussian draws, so the first j columns of a d x k draw are
    the same for every k >= j with the same seed.
    """
    if not 1 <= k <= d:
        raise InvalidRankError(f"rank k={k} must satisfy 1 <= k <= d={d}")
    # Drawn column by column so prefixes do not depend on k.
    return _modified_gram_schmidt(rng.normal((k, d)).T)


def orthonormality_error(u: Matrix) -> float:
    gram = u.T @ u
    return float(np.max(np.abs(gram - np.eye(u.shape[1]))))


def check_orthonormal(u: Matrix, tolerance: float = ORTHONORMAL_TOLERANCE) -> Matrix:
    error = orthonormality_error(u)
    if error > tolerance:
        raise InvalidParameterError(
            f"basis columns are not orthonormal: max |U^T U - I| = {error:.3g}"
        )
    return u


def load_basis(path: str | Path, d: int | None = None) -> Matrix:
    """Read a basis from a JSON document ``{"U": [[...], ...]}`` (d rows)."""
    with open(path) as f:
        document = json.load(f)
    u = as_matrix(document["U"], rows=d, name=f"basis in {path}")
    if u.shape[1] > u.shape[0]:
        raise InvalidRankError(f"basis in {path} has more columns than rows")
    return check_orthonormal(u)


def _max_l1_over_signs(a: Matrix) -> float:
    # Sign vectors v and -v give the same norm, so the first sign stays +1.
    n = a.shape[1]
    free = n - 1
    shifts = np.arange(free, dtype=np.int64)
    best = 0.0
    total = 1 << free
    for start in range(0, total, _ENUMERATION_CHUNK):
        index = np.arange(start, min(start + _ENUMERATION_CHUNK, total), dtype=np.int64)
        bits = (index[:, None] >> shifts) & 1
        signs = np.empty((index.size, n))
        signs[:, 0] = 1.0
        signs[:, 1:] = 1.0 - 2.0 * bits
        best = max(best, float(np.max(np.abs(signs @ a.T).sum(axis=1))))
    return best


def op_norm_inf_to_one(a: Matrix) -> OperatorNorm:
    """
    The inf->1 operator norm max_{||v||_inf <= 1} ||A v||_1.

    The maximum is attained at a sign vector. Exact enumeration runs over the
    columns when there are at most 24 of them; since the norm of A equals the
    norm of A^T, a matrix with few rows is enumerated over its rows instead.
    Otherwise the entrywise absolute sum is returned with ``exact=False``; it
    is an upper bound on the true value.
    """
    a = as_matrix(a, name="A")
    if a.size == 0:
        raise DimensionError("operator norm of an empty matrix")
    rows, cols = a.shape
    if cols <= EXACT_ENUMERATION_LIMIT:
        return OperatorNorm(_max_l1_over_signs(a), True)
    if rows <= EXACT_ENUMERATION_LIMIT:
        return OperatorNorm(_max_l1_over_signs(a.T), True)
    logger.warning(
        "Matrix of shape %s exceeds the exact enumeration limit; "
        "using the entrywise upper bound",
        a.shape,
    )
    return OperatorNorm(entrywise_abs_sum(a), False)


def entrywise_abs_sum(a: Matrix) -> float:
    return float(np.sum(np.abs(a)))


def gaussian_vector(mean: Vector, sigma: float, rng: SeededRng) -> Vector:
    """Draw mean + N(0, sigma^2 I). sigma = 0 returns a copy of the mean."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be non-negative, got {sigma}")
    mean = as_vector(mean, name="mean")
    if sigma == 0:
        return mean.copy()
    return mean + sigma * rng.normal(mean.shape[0])
