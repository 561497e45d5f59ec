"""Unit-norm linear sign classifier f(x) = sign(<w_hat, x>)."""

from __future__ import annotations

import numpy as np

from semattack.errors import InvalidParameterError
from semattack.models.base import Classifier
from semattack.tensor_math import as_vector


class LinearModel(Classifier):
    """
    Linear classifier exposed through two logits ``(s, -s)`` with
    ``s = <w_hat, x>``, so argmax reproduces the sign rule and every attack
    treats it like any other logit model.
    """

    kind = "linear"
    c = 2

    def __init__(self, w_hat):
        w = as_vector(w_hat, name="w_hat")
        norm = np.linalg.norm(w)
        if norm == 0:
            raise InvalidParameterError("w_hat must be non-zero")
        self.w_hat = w / norm
        self.d = w.shape[0]

    @classmethod
    def initialize(cls, d: int, rng) -> "LinearModel":
        return cls(rng.normal(d))

    def params(self):
        return {"w_hat": self.w_hat}

    def forward(self, X):
        s = X @ self.w_hat
        return np.stack([s, -s], axis=1), X

    def backward(self, cache, dlogits):
        X = cache
        ds = dlogits[:, 0] - dlogits[:, 1]
        return np.outer(ds, self.w_hat), {"w_hat": X.T @ ds}

    def after_update(self):
        self.w_hat /= np.linalg.norm(self.w_hat)


def fit_class_mean_direction(X, y) -> LinearModel:
    """Normalized difference between the +1 and -1 class means."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if not np.any(y == 1) or not np.any(y == -1):
        raise InvalidParameterError("both classes are needed to fit a class-mean direction")
    return LinearModel(X[y == 1].mean(axis=0) - X[y == -1].mean(axis=0))
