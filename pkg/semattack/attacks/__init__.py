"""Semantic and pixel-space attacks with a shared evaluation harness."""

from semattack.attacks.base import AffineGrid, AttackConfig, AttackResult
from semattack.attacks.evaluation import RESULT_COLUMNS, Evaluation, evaluate_attack
from semattack.attacks.pixel import cw_linf_attack, fgsm_attack, pgd_attack
from semattack.attacks.sampling import worst_of_s_random
from semattack.attacks.semantic import attack_gradient, semantic_attack
from semattack.attacks.spatial import spatial_grid_attack
from semattack.models.losses import cw_loss, cw_objective

__all__ = [
    "AffineGrid",
    "AttackConfig",
    "AttackResult",
    "Evaluation",
    "RESULT_COLUMNS",
    "attack_gradient",
    "cw_linf_attack",
    "cw_loss",
    "cw_objective",
    "evaluate_attack",
    "fgsm_attack",
    "pgd_attack",
    "semantic_attack",
    "spatial_grid_attack",
    "worst_of_s_random",
]
