"""
Run directories, manifests and the data/model pipeline shared by experiments.

Every subcommand writes into ``<output.root>/<name>/``. Tables are written as
CSV with a fixed column order and no timestamps, so identical configs give
byte-identical bodies; anything time-dependent goes to ``manifest.json``.
"""

from __future__ import annotations

import logging
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from semattack.attacks import (
    Evaluation,
    cw_linf_attack,
    evaluate_attack,
    fgsm_attack,
    pgd_attack,
    semantic_attack,
    spatial_grid_attack,
    worst_of_s_random,
)
from semattack.config import ExperimentConfig
from semattack.data import Dataset, load_dataset, sample_dataset
from semattack.errors import DatasetError, DimensionError
from semattack.models import (
    AdamState,
    Classifier,
    EpochMetrics,
    LinearModel,
    TwoLayerMlp,
    accuracy,
    load_checkpoint,
    train,
)
from semattack.persistence import atomic_write_text, write_json
from semattack.tensor_math import SeededRng

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RESULTS = "results.csv"
DEPENDENCIES = ("policyengine-core", "numpy", "scipy", "pandas", "pyyaml", "tqdm")


def _version(distribution: str) -> str | None:
    try:
        return metadata.version(distribution)
    except metadata.PackageNotFoundError:
        return None


def package_versions() -> dict[str, str | None]:
    versions = {"semattack": _version("semattack"), "python": platform.python_version()}
    versions.update({name: _version(name) for name in DEPENDENCIES})
    return versions


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Run:
    """An output directory plus the manifest describing it."""

    cfg: ExperimentConfig
    directory: Path
    started: str = field(default_factory=_now)
    outputs: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def open(cls, cfg: ExperimentConfig, directory: str | Path | None = None) -> "Run":
        directory = Path(directory) if directory is not None else cfg.run_dir
        directory.mkdir(parents=True, exist_ok=True)
        logger.info("Writing %s run to %s", cfg.experiment, directory)
        return cls(cfg=cfg, directory=directory)

    def path(self, name: str) -> Path:
        return self.directory / name

    def record(self, name: str) -> Path:
        if name not in self.outputs:
            self.outputs.append(name)
        return self.path(name)

    def write_csv(self, name: str, table: pd.DataFrame) -> Path:
        path = self.record(name)
        atomic_write_text(path, table.to_csv(index=False, lineterminator="\n"))
        logger.info("Wrote %d rows to %s", len(table), path)
        return path

    def write_json(self, name: str, document: Any) -> Path:
        path = self.record(name)
        write_json(path, document, indent=2)
        logger.info("Wrote %s", path)
        return path

    def seeds(self) -> dict[str, int]:
        cfg = self.cfg
        return {
            "data": cfg.data.seed,
            "evaluation": evaluation_seed(cfg),
            "model": cfg.model.seed,
            "basis": cfg.transform.basis_seed,
            "attack": cfg.attack.seed,
            "bound": cfg.bound.seed,
        }

    def manifest(self) -> dict:
        return {
            "subcommand": self.cfg.experiment,
            "config_hash": self.cfg.config_hash(),
            "config": self.cfg.to_dict(),
            "seeds": self.seeds(),
            "versions": package_versions(),
            "started": self.started,
            "finished": _now(),
            "outputs": list(self.outputs),
            **self.extra,
        }

    def close(self) -> Path:
        return write_json(self.path(MANIFEST), self.manifest(), indent=2)


def evaluation_seed(cfg: ExperimentConfig) -> int:
    return cfg.data.seed + 1


def training_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.data.path is not None:
        dataset = load_dataset(cfg.data.path)
        if dataset.d != cfg.data.d:
            raise DimensionError(f"{cfg.data.path} has d={dataset.d}, config says d={cfg.data.d}")
        return dataset
    return sample_dataset(cfg.data.mixture(), cfg.data.n, SeededRng(cfg.data.seed))


def evaluation_slice(cfg: ExperimentConfig, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """A separate draw from the training mixture that attacks are run on."""
    if cfg.data.eval_n == 0:
        return np.empty((0, dataset.d)), np.empty(0, dtype=np.int64)
    held_out = sample_dataset(dataset.spec, cfg.data.eval_n, SeededRng(evaluation_seed(cfg)))
    return held_out.X, held_out.y


def fit_model(
    cfg: ExperimentConfig, dataset: Dataset, progress: bool = False
) -> tuple[Classifier, list[EpochMetrics]]:
    rng = SeededRng(cfg.model.seed)
    if cfg.model.kind == "linear":
        model: Classifier = LinearModel.initialize(dataset.d, rng)
    else:
        model = TwoLayerMlp.initialize(dataset.d, cfg.model.hidden, rng)
    return train(
        model,
        dataset,
        cfg.model.epochs,
        AdamState(lr=cfg.model.lr),
        rng.spawn(0),
        batch_size=cfg.model.batch_size,
        progress=progress,
    )


def target_model(cfg: ExperimentConfig, dataset: Dataset, progress: bool = False) -> Classifier:
    """The configured checkpoint, or a model trained on ``dataset``."""
    if cfg.model.checkpoint is not None:
        model = load_checkpoint(cfg.model.checkpoint)
        if model.d != dataset.d:
            raise DimensionError(
                f"checkpoint {cfg.model.checkpoint} expects d={model.d}, data has d={dataset.d}"
            )
        return model
    model, _ = fit_model(cfg, dataset, progress=progress)
    X_test, y_test = dataset.subset("test")
    logger.info("Target model test accuracy %.4f", accuracy(model, X_test, y_test))
    return model


def read_results(directory: str | Path) -> pd.DataFrame:
    path = Path(directory) / RESULTS
    if not path.is_file():
        raise DatasetError(f"{directory} holds no {RESULTS}")
    return pd.read_csv(path)


def single_attack(
    cfg: ExperimentConfig,
    model: Classifier,
    X: np.ndarray,
    y: np.ndarray,
    progress: bool = False,
) -> Evaluation:
    """Evaluate the configured ``attack.method`` over an evaluation slice."""
    method = cfg.attack.method
    attack_cfg = cfg.attack.attack_config()
    eps = cfg.attack.eps
    step = attack_cfg.step_for(eps)
    spec = None
    meta = {"transform": "", "rectified": False, "k": None, "eps": eps}
    if method in ("semantic", "worst_of_s"):
        spec = cfg.transform.spec(model.d, eps_linf=attack_cfg.eps_linf)
        meta = {"transform": spec.kind, "rectified": spec.rectified, "k": spec.k, "eps": spec.eps_linf}
    elif method == "spatial":
        meta = {"transform": "affine_spatial", "rectified": False, "k": None, "eps": None}
    attacks = {
        "semantic": lambda x, label, rng: semantic_attack(model, spec, x, label, attack_cfg),
        "worst_of_s": lambda x, label, rng: worst_of_s_random(model, spec, x, label, attack_cfg, rng),
        "fgsm": lambda x, label, rng: fgsm_attack(model, x, label, eps),
        "pgd": lambda x, label, rng: pgd_attack(
            model, x, label, eps, step, attack_cfg.pgd_iters, rng, attack_cfg.pgd_restarts
        ),
        "cw_linf": lambda x, label, rng: cw_linf_attack(model, x, label, eps, step, attack_cfg.pgd_iters),
        "spatial": lambda x, label, rng: spatial_grid_attack(model, x, label, attack_cfg.grid),
    }
    return evaluate_attack(
        model,
        X,
        y,
        attacks[method],
        seed=attack_cfg.seed,
        name=method,
        progress=progress,
        **meta,
    )
