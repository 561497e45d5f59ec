"""Minibatch cross-entropy training with Adam."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from tqdm import tqdm

from semattack.data import Dataset
from semattack.errors import DatasetError
from semattack.models.adam import AdamState, adam_step
from semattack.models.base import Classifier
from semattack.models.losses import cross_entropy, cross_entropy_grad, label_to_index
from semattack.tensor_math import SeededRng

logger = logging.getLogger(__name__)

BATCH_SIZE = 32


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float

    def to_dict(self) -> dict:
        return asdict(self)


def accuracy(model: Classifier, X, y) -> float:
    """Fraction of rows whose argmax logit matches the +1/-1 label."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        logger.warning("accuracy of an empty set is vacuously 1.0")
        return 1.0
    return float(np.mean(model.predict(X) == label_to_index(y)))


def mean_loss(model: Classifier, X, y) -> float:
    if len(X) == 0:
        return 0.0
    logits, _ = model.forward(np.asarray(X, dtype=np.float64))
    return float(np.mean(cross_entropy(logits, label_to_index(y))))


def parameter_gradients(model: Classifier, X, y) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    idx = label_to_index(y)
    logits, cache = model.forward(np.asarray(X, dtype=np.float64))
    loss = float(np.mean(cross_entropy(logits, idx)))
    dlogits = cross_entropy_grad(logits, idx) / len(idx)
    _, grads = model.backward(cache, dlogits)
    return loss, grads


def train(
    model: Classifier,
    dataset: Dataset,
    epochs: int,
    adam: AdamState,
    rng: SeededRng,
    batch_size: int = BATCH_SIZE,
    progress: bool = False,
) -> tuple[Classifier, list[EpochMetrics]]:
    """
    Train ``model`` in place on the train split and report per-epoch metrics.

    Each epoch visits the train split in a permutation drawn from ``rng``, so
    identical seeds give identical weights.
    """
    X_train, y_train = dataset.subset("train")
    X_val, y_val = dataset.subset("val")
    if len(X_train) == 0:
        raise DatasetError("cannot train on an empty train split")

    history = []
    for epoch in tqdm(range(1, epochs + 1), desc="train", disable=not progress):
        order = rng.permutation(len(X_train))
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            _, grads = parameter_gradients(model, X_train[batch], y_train[batch])
            adam_step(adam, model.params(), grads)
            model.after_update()
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=mean_loss(model, X_train, y_train),
            train_accuracy=accuracy(model, X_train, y_train),
            val_loss=mean_loss(model, X_val, y_val),
            val_accuracy=accuracy(model, X_val, y_val),
        )
        history.append(metrics)
        logger.info(
            "epoch %d: train loss %.4f acc %.4f | val loss %.4f acc %.4f",
            epoch,
            metrics.train_loss,
            metrics.train_accuracy,
            metrics.val_loss,
            metrics.val_accuracy,
        )
    return model, history
