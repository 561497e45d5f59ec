"""JSON checkpoints for target models."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from semattack.errors import DatasetError, InvalidParameterError
from semattack.models.base import Classifier
from semattack.models.linear import LinearModel
from semattack.models.mlp import TwoLayerMlp
from semattack.persistence import read_json, write_json

logger = logging.getLogger(__name__)

MODEL_KINDS = {LinearModel.kind: LinearModel, TwoLayerMlp.kind: TwoLayerMlp}


def model_to_dict(model: Classifier, config: dict | None = None) -> dict:
    return {
        "kind": model.kind,
        "d": model.d,
        "h": getattr(model, "h", None),
        "c": model.c,
        "weights": {name: value.tolist() for name, value in model.params().items()},
        "config": config or {},
    }


def model_from_dict(document: dict) -> Classifier:
    kind = document.get("kind")
    if kind not in MODEL_KINDS:
        raise DatasetError(f"unknown model kind {kind!r}")
    weights = {name: np.asarray(value, dtype=np.float64) for name, value in document["weights"].items()}
    if kind == LinearModel.kind:
        try:
            return LinearModel(weights["w_hat"])
        except InvalidParameterError as e:
            raise DatasetError(f"invalid linear checkpoint: {e}") from e
    return TwoLayerMlp(**weights)


def save_checkpoint(model: Classifier, path: str | Path, config: dict | None = None) -> Path:
    path = write_json(path, model_to_dict(model, config))
    logger.info("Saved %s checkpoint to %s", model.kind, path)
    return path


def load_checkpoint(path: str | Path) -> Classifier:
    return model_from_dict(read_json(path))
