"""Common interface of the target classifiers."""

from __future__ import annotations

import copy
from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from semattack.errors import DimensionError
from semattack.typing import Matrix


class Classifier(ABC):
    """
    A differentiable classifier f: R^d -> R^c.

    Subclasses implement a batched forward pass that returns logits together
    with whatever the backward pass needs, and a backward pass that maps
    upstream logit gradients to input and parameter gradients.
    """

    kind: str = ""
    d: int
    c: int

    @abstractmethod
    def params(self) -> dict[str, np.ndarray]:
        """Live references to the trainable arrays, keyed by name."""

    @abstractmethod
    def forward(self, X: Matrix) -> tuple[Matrix, Any]:
        """Logits for a batch of shape (B, d) and the backward cache."""

    @abstractmethod
    def backward(self, cache: Any, dlogits: Matrix) -> tuple[Matrix, dict[str, np.ndarray]]:
        """Gradients with respect to the batch inputs and every parameter."""

    def config(self) -> dict:
        return {}

    def after_update(self) -> None:
        """Restore parameter invariants after an optimizer step."""

    def _batch(self, x: np.ndarray) -> tuple[Matrix, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != self.d:
            raise DimensionError(f"{self.kind} model expects inputs of dimension {self.d}, got {x.shape}")
        return X, single

    def logits(self, x: np.ndarray) -> np.ndarray:
        X, single = self._batch(x)
        out, _ = self.forward(X)
        return out[0] if single else out

    def predict(self, X: Matrix) -> np.ndarray:
        return np.argmax(self.logits(np.atleast_2d(X)), axis=1)

    def copy(self) -> "Classifier":
        return copy.deepcopy(self)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        mine, theirs = self.params(), other.params()
        return mine.keys() == theirs.keys() and all(
            np.array_equal(mine[k], theirs[k]) for k in mine
        )
