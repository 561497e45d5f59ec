"""Attack configuration, per-sample results and the affine search grid."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from semattack.errors import InvalidParameterError
from semattack.models import CROSS_ENTROPY, CW, LOSS_KINDS, Classifier, predict_index
from semattack.models.losses import index_to_label, label_to_index
from semattack.tensor_math import norm_linf
from semattack.transforms import TransformSpec
from semattack.typing import Vector


@dataclass(frozen=True)
class AffineGrid:
    """Rotations in degrees crossed with integer shifts on both image axes."""

    max_rotation: float = 30.0
    num_rotations: int = 31
    max_shift: int = 2

    def __post_init__(self):
        if self.max_rotation < 0 or self.max_rotation > 180:
            raise InvalidParameterError("the maximum rotation must lie in [0, 180]")
        if self.num_rotations < 1:
            raise InvalidParameterError("the number of rotations must be positive")
        if self.max_shift < 0:
            raise InvalidParameterError("the maximum shift must be non-negative")

    def rotations(self) -> list[float]:
        return sorted(set(np.linspace(-self.max_rotation, self.max_rotation, self.num_rotations).tolist()))

    def shifts(self) -> list[int]:
        return list(range(-self.max_shift, self.max_shift + 1))

    def points(self) -> list[tuple[float, int, int]]:
        return [(r, sx, sy) for r in self.rotations() for sx in self.shifts() for sy in self.shifts()]

    def contains_identity(self) -> bool:
        return 0.0 in self.rotations()

    @classmethod
    def identity(cls) -> "AffineGrid":
        return cls(max_rotation=0.0, num_rotations=1, max_shift=0)


@dataclass(frozen=True)
class AttackConfig:
    loss: str = CW
    lr: float = 0.01
    max_iter: int = 500
    eps_linf: float | None = None
    samples_s: int = 10
    pgd_step: float | None = None
    pgd_iters: int = 40
    pgd_restarts: int = 1
    grid: AffineGrid = field(default_factory=AffineGrid)
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise InvalidParameterError(f"unknown loss {self.loss!r}; expected one of {LOSS_KINDS}")
        if not self.lr > 0:
            raise InvalidParameterError(f"lr must be positive, got {self.lr}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.samples_s < 1:
            raise InvalidParameterError(f"samples_s must be at least 1, got {self.samples_s}")
        if self.pgd_iters < 1 or self.pgd_restarts < 1:
            raise InvalidParameterError("PGD needs at least one iteration and one restart")

    def step_for(self, eps: float) -> float:
        """PGD step size, defaulting to eps / 4."""
        return self.pgd_step if self.pgd_step is not None else eps / 4.0

    def budgeted(self, spec: TransformSpec) -> TransformSpec:
        """``spec`` under this config's eps when it carries no budget of its own."""
        if self.eps_linf is None or spec.eps_linf is not None:
            return spec
        return replace(spec, eps_linf=self.eps_linf)


@dataclass(frozen=True)
class AttackResult:
    success: bool
    delta_star: Vector
    x: Vector = field(repr=False)
    x_adv: Vector = field(repr=False)
    iterations_used: int
    final_loss: float
    original_label: int
    adversarial_label: int
    constraint: str = "none"

    @property
    def linf_distance(self) -> float:
        return norm_linf(self.x_adv - self.x)


def classify(
    model: Classifier,
    x: Vector,
    x_adv: Vector,
    true_label: int,
    delta: Vector,
    iterations: int,
    final_loss: float,
    constraint: str = "none",
) -> AttackResult:
    """Build a result whose success flag is derived from the adversarial prediction."""
    true_idx = int(label_to_index(true_label))
    adv_idx = predict_index(model.logits(x_adv), reference=true_idx)
    adversarial_label = int(index_to_label(adv_idx))
    return AttackResult(
        success=adversarial_label != int(true_label),
        delta_star=np.asarray(delta, dtype=np.float64),
        x=x,
        x_adv=x_adv,
        iterations_used=iterations,
        final_loss=float(final_loss),
        original_label=int(true_label),
        adversarial_label=adversarial_label,
        constraint=constraint,
    )


__all__ = ["AffineGrid", "AttackConfig", "AttackResult", "CROSS_ENTROPY", "CW", "classify"]
