"""
Synthetic mixture-of-Gaussians data.

Two generators live here: the ten-component mixture whose means are
digit-like 10 x 10 images (classes 0-4 -> +1, 5-9 -> -1), and the symmetric
two-component mixture with means +/- theta_star used by the robust error
bound. Both produce a :class:`Dataset` with a deterministic 70/20/10 split.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from scipy.spatial.distance import pdist

from semattack.errors import DatasetError, DimensionError, InvalidParameterError
from semattack.persistence import read_json, write_json
from semattack.tensor_math import SeededRng, as_matrix, as_vector
from semattack.typing import Labels, Matrix, Vector

logger = logging.getLogger(__name__)

BUILTIN_MEANS = "builtin"
NUM_DIGITS = 10
_GLYPH_SIDE = 10
_BUILTIN_SEED = 20190610
_GLYPH_WEIGHT = 0.3
# Smallest pairwise l2 distance the builtin means must keep after resampling.
MIN_SEPARATION = 1.0

TRAIN_FRACTION = 0.7
VAL_FRACTION = 0.2

# Seven-segment strokes on a 10 x 10 canvas as (rows, cols) slices.
_SEGMENTS = {
    "a": (slice(1, 2), slice(2, 8)),
    "b": (slice(1, 5), slice(7, 8)),
    "c": (slice(4, 9), slice(7, 8)),
    "d": (slice(8, 9), slice(2, 8)),
    "e": (slice(4, 9), slice(2, 3)),
    "f": (slice(1, 5), slice(2, 3)),
    "g": (slice(4, 5), slice(2, 8)),
}
_DIGIT_SEGMENTS = [
    "abcdef",
    "bc",
    "abged",
    "abgcd",
    "fgbc",
    "afgcd",
    "afgedc",
    "abc",
    "abcdefg",
    "abcdfg",
]


@dataclass(frozen=True)
class MixtureSpec:
    means: Matrix
    sigma: float
    class_of_component: tuple[int, ...]

    def __post_init__(self):
        means = as_matrix(self.means, name="means")
        object.__setattr__(self, "means", means)
        object.__setattr__(
            self, "class_of_component", tuple(int(c) for c in self.class_of_component)
        )
        if means.shape[0] < 1:
            raise DatasetError("a mixture needs at least one component")
        if len(self.class_of_component) != means.shape[0]:
            raise DatasetError(
                f"{len(self.class_of_component)} labels for {means.shape[0]} components"
            )
        if any(c not in (1, -1) for c in self.class_of_component):
            raise DatasetError("component labels must be +1 or -1")
        if self.sigma < 0:
            raise InvalidParameterError(f"sigma must be non-negative, got {self.sigma}")
        if self.sigma > math.sqrt(self.d):
            logger.warning(
                "sigma=%.3g exceeds sqrt(d)=%.3g; classes will overlap heavily",
                self.sigma,
                math.sqrt(self.d),
            )

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def m(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class TwoComponentSpec:
    theta_star: Vector
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "theta_star", as_vector(self.theta_star, name="theta_star"))
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")

    @property
    def d(self) -> int:
        return self.theta_star.shape[0]

    def to_mixture(self) -> MixtureSpec:
        return MixtureSpec(
            means=np.stack([self.theta_star, -self.theta_star]),
            sigma=self.sigma,
            class_of_component=(1, -1),
        )


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    @classmethod
    def for_size(cls, n: int) -> "Split":
        n_train = int(math.floor(TRAIN_FRACTION * n))
        n_val = int(math.floor(VAL_FRACTION * n))
        index = np.arange(n, dtype=np.int64)
        return cls(
            train=index[:n_train],
            val=index[n_train : n_train + n_val],
            test=index[n_train + n_val :],
        )


@dataclass(frozen=True)
class Dataset:
    X: Matrix
    y: Labels
    split: Split
    spec: MixtureSpec
    seed: int
    component: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DatasetError(f"X shape {self.X.shape} does not match {self.y.shape[0]} labels")
        covered = np.concatenate([self.split.train, self.split.val, self.split.test])
        if covered.size != self.n or np.unique(covered).size != self.n:
            raise DatasetError("split must partition the sample indices")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, part: str) -> tuple[Matrix, Labels]:
        index = getattr(self.split, part)
        return self.X[index], self.y[index]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "sigma": self.spec.sigma,
            "means": self.spec.means.tolist(),
            "class_of_component": list(self.spec.class_of_component),
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "split": {
                "train": self.split.train.tolist(),
                "val": self.split.val.tolist(),
                "test": self.split.test.tolist(),
            },
            "component": None if self.component is None else self.component.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, document: dict) -> "Dataset":
        try:
            d = int(document["d"])
            spec = MixtureSpec(
                means=np.asarray(document["means"], dtype=np.float64).reshape(-1, d),
                sigma=float(document["sigma"]),
                class_of_component=document["class_of_component"],
            )
            split = Split(
                *(
                    np.asarray(document["split"][part], dtype=np.int64)
                    for part in ("train", "val", "test")
                )
            )
            component = document.get("component")
            return cls(
                X=np.asarray(document["X"], dtype=np.float64).reshape(-1, d),
                y=np.asarray(document["y"], dtype=np.int64),
                split=split,
                spec=spec,
                seed=int(document["seed"]),
                component=None if component is None else np.asarray(component, dtype=np.int64),
            )
        except (KeyError, TypeError) as e:
            raise DatasetError(f"malformed dataset document: {e}") from e


def save_dataset(dataset: Dataset, path: str | Path) -> Path:
    path = write_json(path, dataset.to_dict())
    logger.info("Saved dataset (n=%d, d=%d) to %s", dataset.n, dataset.d, path)
    return path


def load_dataset(path: str | Path) -> Dataset:
    try:
        document = read_json(path)
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path} is not valid JSON: {e}") from e
    return Dataset.from_dict(document)


def digit_classes() -> tuple[int, ...]:
    """Digits 0-4 form class +1 and digits 5-9 form class -1."""
    return tuple(1 if digit < 5 else -1 for digit in range(NUM_DIGITS))


def _builtin_glyphs() -> Matrix:
    rng = SeededRng(_BUILTIN_SEED)
    means = np.empty((NUM_DIGITS, _GLYPH_SIDE * _GLYPH_SIDE))
    for digit, segments in enumerate(_DIGIT_SEGMENTS):
        glyph = np.zeros((_GLYPH_SIDE, _GLYPH_SIDE))
        for segment in segments:
            glyph[_SEGMENTS[segment]] = 1.0
        texture = rng.uniform(0.0, 1.0, glyph.shape)
        means[digit] = (_GLYPH_WEIGHT * glyph + (1 - _GLYPH_WEIGHT) * texture).ravel()
    return means


def _square_side(d: int) -> int:
    side = math.isqrt(d)
    if side * side != d:
        raise DimensionError(f"d={d} is not a perfect square; cannot view it as an image")
    return side


def resample_images(means: Matrix, d_target: int) -> Matrix:
    """Bilinearly resample each flattened square image to d_target pixels."""
    if means.shape[1] == d_target:
        return means
    source = _square_side(means.shape[1])
    target = _square_side(d_target)
    images = means.reshape(-1, source, source)
    resampled = [
        zoom(image, target / source, order=1, mode="nearest", grid_mode=True)
        for image in images
    ]
    return np.clip(np.stack(resampled).reshape(-1, d_target), 0.0, 1.0)


def load_means(source: str | Path, d_target: int) -> Matrix:
    """
    Component means for the ten-digit mixture.

    ``source`` is either the tag ``"builtin"`` (deterministic seven-segment
    glyphs blended with a fixed texture) or the path of a JSON document
    ``{"means": [[...], ...]}`` with ten rows of values in [0, 1].
    The builtin means are rejected at resolutions where two of them fall
    closer than ``MIN_SEPARATION``.
    """
    if str(source) == BUILTIN_MEANS:
        means = resample_images(_builtin_glyphs(), d_target)
        separation = min_pairwise_distance(means)
        if separation < MIN_SEPARATION:
            raise DatasetError(
                f"builtin means are only {separation:.4f} apart at d={d_target}; "
                f"use a larger d or a means file"
            )
        return means
    try:
        document = read_json(source)
    except json.JSONDecodeError as e:
        raise DatasetError(f"{source} is not valid JSON: {e}") from e
    if "means" not in document:
        raise DatasetError(f"{source} has no 'means' entry")
    means = as_matrix(document["means"], name=f"means in {source}")
    if means.shape[0] != NUM_DIGITS:
        raise DatasetError(f"{source} has {means.shape[0]} means, expected {NUM_DIGITS}")
    if means.min() < 0.0 or means.max() > 1.0:
        raise DatasetError(f"means in {source} must lie in [0, 1]")
    return resample_images(means, d_target)


def min_pairwise_distance(means: Matrix) -> float:
    return float(pdist(means).min())


def default_mixture(
    d: int = 100, sigma: float = 0.5, source: str | Path = BUILTIN_MEANS
) -> MixtureSpec:
    return MixtureSpec(
        means=load_means(source, d), sigma=sigma, class_of_component=digit_classes()
    )


def _sample(spec: MixtureSpec, n: int, rng: SeededRng) -> Dataset:
    if n < 0:
        raise InvalidParameterError(f"n must be non-negative, got {n}")
    component = rng.integers(0, spec.m, n).astype(np.int64)
    X = spec.means[component].copy()
    if spec.sigma > 0 and n > 0:
        X += spec.sigma * rng.normal((n, spec.d))
    labels = np.asarray(spec.class_of_component, dtype=np.int64)
    return Dataset(
        X=X.reshape(n, spec.d),
        y=labels[component],
        split=Split.for_size(n),
        spec=spec,
        seed=rng.seed,
        component=component,
    )


def sample_dataset(spec: MixtureSpec, n: int, rng: SeededRng) -> Dataset:
    """Draw n labelled samples: a uniformly chosen mean plus N(0, sigma^2 I)."""
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n}")
    dataset = _sample(spec, n, rng)
    logger.info(
        "Sampled %d points from a %d-component mixture (d=%d, sigma=%.3g)",
        n,
        spec.m,
        spec.d,
        spec.sigma,
    )
    return dataset


def sample_two_component(spec: TwoComponentSpec, n: int, rng: SeededRng) -> Dataset:
    """Draw n samples with label y uniform in {+1, -1} and x ~ N(y theta_star, sigma^2 I)."""
    return _sample(spec.to_mixture(), n, rng)
