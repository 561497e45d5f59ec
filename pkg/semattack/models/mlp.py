"""One-hidden-layer ReLU network f(x) = W2 ReLU(W1 x + b1) + b2."""

from __future__ import annotations

import numpy as np

from semattack.errors import DimensionError, InvalidParameterError
from semattack.models.base import Classifier
from semattack.tensor_math import as_matrix, as_vector


class TwoLayerMlp(Classifier):
    kind = "mlp"

    def __init__(self, W1, b1, W2, b2):
        self.W1 = as_matrix(W1, name="W1").copy()
        self.h, self.d = self.W1.shape
        self.b1 = as_vector(b1, dim=self.h, name="b1").copy()
        self.W2 = as_matrix(W2, cols=self.h, name="W2").copy()
        self.c = self.W2.shape[0]
        self.b2 = as_vector(b2, dim=self.c, name="b2").copy()
        if self.c != 2:
            raise DimensionError(f"only binary classifiers are supported, got c={self.c}")

    @classmethod
    def initialize(cls, d: int, h: int, rng, c: int = 2) -> "TwoLayerMlp":
        """He-initialized weights and zero biases."""
        if h < 1:
            raise InvalidParameterError(f"hidden width must be positive, got {h}")
        return cls(
            W1=rng.normal((h, d)) * np.sqrt(2.0 / d),
            b1=np.zeros(h),
            W2=rng.normal((c, h)) * np.sqrt(2.0 / h),
            b2=np.zeros(c),
        )

    def params(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def config(self):
        return {"h": self.h}

    def forward(self, X):
        pre = X @ self.W1.T + self.b1
        hidden = np.maximum(pre, 0.0)
        return hidden @ self.W2.T + self.b2, (X, pre, hidden)

    def backward(self, cache, dlogits):
        X, pre, hidden = cache
        # ReLU subgradient at 0 is taken as 0.
        dpre = (dlogits @ self.W2) * (pre > 0)
        grads = {
            "W1": dpre.T @ X,
            "b1": dpre.sum(axis=0),
            "W2": dlogits.T @ hidden,
            "b2": dlogits.sum(axis=0),
        }
        return dpre @ self.W1, grads
