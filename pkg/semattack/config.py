"""
Run configuration.

A run starts from the defaults in the parameter tree, merges one JSON (or
YAML) document on top and finally applies ``--set section.key=value``
overrides. The result is an immutable :class:`ExperimentConfig` whose
canonical JSON hash is recorded in every run manifest.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

from semattack.attacks import AffineGrid, AttackConfig
from semattack.data import BUILTIN_MEANS, MixtureSpec, default_mixture
from semattack.errors import ConfigError
from semattack.models import LOSS_KINDS
from semattack.system import AttackLab
from semattack.tensor_math import SeededRng, load_basis, random_orthonormal
from semattack.transforms import BASIS_KINDS, TRANSFORM_KINDS, TransformSpec

logger = logging.getLogger(__name__)

EXPERIMENTS = ("gen-data", "train", "attack", "sweep", "compare", "verify-bound", "report")
ATTACK_METHODS = ("semantic", "fgsm", "pgd", "cw_linf", "worst_of_s", "spatial")
RANDOM_BASIS = "random"

# Config section -> parameter tree groups merged into it.
SECTION_SOURCES = {
    "data": ("data.mixture",),
    "model": ("models.target",),
    "transform": ("transforms.defaults",),
    "attack": ("attacks.semantic", "attacks.baselines", "attacks.run"),
    "sweep": ("experiments.sweep",),
    "compare": ("experiments.compare",),
    "bound": ("experiments.bound",),
    "output": ("experiments.output",),
}


@dataclass(frozen=True)
class DataConfig:
    d: int
    n: int
    eval_n: int
    sigma: float
    seed: int
    means: str
    path: str | None

    def mixture(self) -> MixtureSpec:
        return default_mixture(d=self.d, sigma=self.sigma, source=self.means)


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    hidden: int
    epochs: int
    batch_size: int
    lr: float
    seed: int
    checkpoint: str | None


@dataclass(frozen=True)
class TransformConfig:
    kind: str
    k: int
    rectified: bool
    active: tuple[int, ...] | None
    box: dict
    encoded: bool
    readout: dict
    basis: str
    basis_seed: int

    def basis_matrix(self, d: int, k: int) -> np.ndarray:
        """The first k columns of the configured basis; prefixes are nested across k."""
        if self.basis == RANDOM_BASIS:
            return random_orthonormal(d, k, SeededRng(self.basis_seed))
        full = load_basis(self.basis, d)
        if k > full.shape[1]:
            raise ConfigError(f"basis {self.basis} has {full.shape[1]} columns, k={k} requested")
        return full[:, :k]

    def spec(
        self,
        d: int,
        kind: str | None = None,
        k: int | None = None,
        rectified: bool | None = None,
        eps_linf: float | None = None,
        active: Iterable[int] | None = None,
        U: np.ndarray | None = None,
    ) -> TransformSpec:
        kind = kind or self.kind
        k = k if k is not None else self.k
        if kind in BASIS_KINDS and U is None:
            U = self.basis_matrix(d, k)
        active = active if active is not None else self.active
        return TransformSpec(
            kind=kind,
            d=d,
            U=U if kind in BASIS_KINDS else None,
            rectified=self.rectified if rectified is None else rectified,
            box=(self.box["low"], self.box["high"]),
            eps_linf=eps_linf,
            seed=self.basis_seed if self.basis == RANDOM_BASIS else None,
            encoded=self.encoded and kind in BASIS_KINDS,
            readout=(self.readout["w_off"], self.readout["w_on"]),
            active=tuple(active) if active is not None else None,
        )


@dataclass(frozen=True)
class AttackSettings:
    method: str
    eps: float
    loss: str
    lr: float
    max_iter: int
    eps_linf: float | None
    seed: int
    samples_s: int
    pgd_step: float | None
    pgd_iters: int
    pgd_restarts: int
    grid: dict

    def attack_config(self, eps_linf: float | None = None) -> AttackConfig:
        return AttackConfig(
            loss=self.loss,
            lr=self.lr,
            max_iter=self.max_iter,
            eps_linf=self.eps_linf if eps_linf is None else eps_linf,
            samples_s=self.samples_s,
            pgd_step=self.pgd_step,
            pgd_iters=self.pgd_iters,
            pgd_restarts=self.pgd_restarts,
            grid=AffineGrid(**self.grid),
            seed=self.seed,
        )


@dataclass(frozen=True)
class SweepConfig:
    k: tuple[int, ...]
    kinds: tuple[str, ...]
    rectified: tuple[bool, ...]
    active: tuple[int, ...] | None
    band: float


@dataclass(frozen=True)
class CompareConfig:
    k: int
    quantile: float
    band: float


@dataclass(frozen=True)
class BoundConfig:
    k: tuple[int, ...]
    eps: tuple[float, ...]
    sigma: tuple[float, ...]
    theta_scale: float
    fit_n: int
    mc_n: int
    optimizer_n: int
    seed: int


@dataclass(frozen=True)
class OutputConfig:
    root: str
    run_name: str | None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    data: DataConfig
    model: ModelConfig
    transform: TransformConfig
    attack: AttackSettings
    sweep: SweepConfig
    compare: CompareConfig
    bound: BoundConfig
    output: OutputConfig

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @property
    def run_dir(self) -> Path:
        return Path(self.output.root) / (self.output.run_name or self.experiment)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _jsonable(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def default_sections(lab: AttackLab | None = None) -> dict:
    """Parameter tree defaults regrouped into config sections."""
    lab = lab or AttackLab()
    sections = {}
    for section, sources in SECTION_SOURCES.items():
        merged = {}
        for source in sources:
            merged.update(lab.get(source))
        sections[section] = merged
    return sections


def _merge(base: dict, update: Mapping, path: str = "") -> None:
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {where!r} must be a mapping")
            _merge(base[key], value, f"{where}.")
        else:
            base[key] = value


def parse_override(assignment: str) -> tuple[str, Any]:
    """Split ``key=value``; the value is read as a YAML scalar or flow list."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse the value of override {assignment!r}: {e}") from e
    return key.strip(), value


def _nest(key: str, value: Any) -> dict:
    nested: Any = value
    for part in reversed(key.split(".")):
        nested = {part: nested}
    return nested


def read_config_file(path: str | Path) -> dict:
    path = Path(path)
    with open(path) as f:
        text = f.read()
    try:
        if path.suffix in (".yaml", ".yml"):
            document = yaml.safe_load(text) or {}
        else:
            document = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"{path} is not a valid config document: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a mapping of config sections")
    return document


def _optional_tuple(value, cast=int):
    return None if value is None else tuple(cast(v) for v in value)


def _listed(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _build(experiment: str, s: dict) -> ExperimentConfig:
    try:
        data = DataConfig(
            d=int(s["data"]["d"]),
            n=int(s["data"]["n"]),
            eval_n=int(s["data"]["eval_n"]),
            sigma=float(s["data"]["sigma"]),
            seed=int(s["data"]["seed"]),
            means=str(s["data"]["means"]),
            path=s["data"]["path"],
        )
        model = ModelConfig(
            kind=str(s["model"]["kind"]),
            hidden=int(s["model"]["hidden"]),
            epochs=int(s["model"]["epochs"]),
            batch_size=int(s["model"]["batch_size"]),
            lr=float(s["model"]["lr"]),
            seed=int(s["model"]["seed"]),
            checkpoint=s["model"]["checkpoint"],
        )
        t = s["transform"]
        transform = TransformConfig(
            kind=str(t["kind"]),
            k=int(t["k"]),
            rectified=bool(t["rectified"]),
            active=_optional_tuple(t["active"]),
            box={"low": float(t["box"]["low"]), "high": float(t["box"]["high"])},
            encoded=bool(t["encoded"]),
            readout={"w_off": float(t["readout"]["w_off"]), "w_on": float(t["readout"]["w_on"])},
            basis=str(t["basis"]),
            basis_seed=int(t["basis_seed"]),
        )
        a = s["attack"]
        attack = AttackSettings(
            method=str(a["method"]),
            eps=float(a["eps"]),
            loss=str(a["loss"]),
            lr=float(a["lr"]),
            max_iter=int(a["max_iter"]),
            eps_linf=None if a["eps_linf"] is None else float(a["eps_linf"]),
            seed=int(a["seed"]),
            samples_s=int(a["samples_s"]),
            pgd_step=None if a["pgd_step"] is None else float(a["pgd_step"]),
            pgd_iters=int(a["pgd_iters"]),
            pgd_restarts=int(a["pgd_restarts"]),
            grid={
                "max_rotation": float(a["grid"]["max_rotation"]),
                "num_rotations": int(a["grid"]["num_rotations"]),
                "max_shift": int(a["grid"]["max_shift"]),
            },
        )
        sweep = SweepConfig(
            k=tuple(int(k) for k in _listed(s["sweep"]["k"])),
            kinds=tuple(str(kind) for kind in _listed(s["sweep"]["kinds"])),
            rectified=tuple(bool(r) for r in _listed(s["sweep"]["rectified"])),
            active=_optional_tuple(s["sweep"]["active"]),
            band=float(s["sweep"]["band"]),
        )
        compare = CompareConfig(
            k=int(s["compare"]["k"]),
            quantile=float(s["compare"]["quantile"]),
            band=float(s["compare"]["band"]),
        )
        b = s["bound"]
        bound = BoundConfig(
            k=tuple(int(k) for k in _listed(b["k"])),
            eps=tuple(float(e) for e in _listed(b["eps"])),
            sigma=tuple(float(v) for v in _listed(b["sigma"])),
            theta_scale=float(b["theta_scale"]),
            fit_n=int(b["fit_n"]),
            mc_n=int(b["mc_n"]),
            optimizer_n=int(b["optimizer_n"]),
            seed=int(b["seed"]),
        )
        output = OutputConfig(root=str(s["output"]["root"]), run_name=s["output"]["run_name"])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {e}") from e
    return ExperimentConfig(experiment, data, model, transform, attack, sweep, compare, bound, output)


def _check_rank(name: str, k: int, d: int) -> None:
    if not 1 <= k <= d:
        raise ConfigError(f"{name}={k} must satisfy 1 <= k <= d={d}")


def _check_file(name: str, path: str | None) -> None:
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"{name} {path!r} does not exist")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """
    Check ranges and references. Ranks are only checked for the sections the
    experiment reads, so a small ``data.d`` does not trip over sweep defaults.
    """
    d = cfg.data.d
    if cfg.data.n < 1 or cfg.data.eval_n < 0:
        raise ConfigError("data.n must be positive and data.eval_n non-negative")
    _check_rank("transform.k", cfg.transform.k, d)
    if cfg.experiment == "sweep":
        for k in cfg.sweep.k:
            _check_rank("sweep.k", k, d)
    if cfg.experiment == "compare":
        _check_rank("compare.k", cfg.compare.k, d)
    if cfg.experiment == "verify-bound":
        for k in cfg.bound.k:
            _check_rank("bound.k", k, d)
    if cfg.transform.kind not in TRANSFORM_KINDS:
        raise ConfigError(f"unknown transform.kind {cfg.transform.kind!r}")
    for kind in cfg.sweep.kinds:
        if kind not in BASIS_KINDS:
            raise ConfigError(f"sweep.kinds only accepts {BASIS_KINDS}, got {kind!r}")
    if cfg.model.kind not in ("mlp", "linear"):
        raise ConfigError(f"unknown model.kind {cfg.model.kind!r}")
    if cfg.attack.method not in ATTACK_METHODS:
        raise ConfigError(f"unknown attack.method {cfg.attack.method!r}")
    if cfg.attack.loss not in LOSS_KINDS:
        raise ConfigError(f"unknown attack.loss {cfg.attack.loss!r}")
    if not 0.0 <= cfg.compare.quantile <= 1.0:
        raise ConfigError("compare.quantile must lie in [0, 1]")
    if cfg.data.means != BUILTIN_MEANS:
        _check_file("data.means", cfg.data.means)
    if cfg.transform.basis != RANDOM_BASIS:
        _check_file("transform.basis", cfg.transform.basis)
    _check_file("data.path", cfg.data.path)
    _check_file("model.checkpoint", cfg.model.checkpoint)
    return cfg


def load_config(
    experiment: str,
    path: str | Path | None = None,
    overrides: Iterable[str] = (),
    lab: AttackLab | None = None,
) -> ExperimentConfig:
    """Resolve defaults, an optional config file and ``key=value`` overrides."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    sections = copy.deepcopy(default_sections(lab))
    if path is not None:
        document = read_config_file(path)
        document.pop("experiment", None)
        _merge(sections, document)
    for assignment in overrides:
        key, value = parse_override(assignment)
        _merge(sections, _nest(key, value))
    cfg = validate(_build(experiment, sections))
    logger.debug("Resolved %s config with hash %s", experiment, cfg.config_hash())
    return cfg
