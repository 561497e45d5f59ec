"""
Robust classification error of a linear classifier under subspace attacks.

The data model is the symmetric two-component mixture: y is uniform in
{+1, -1} and x ~ N(y theta_star, sigma^2 I). A unit-norm classifier w_hat is
attacked by x + U delta with ||U delta||_inf <= eps. The projection
<y x, w_hat> is N(<w_hat, theta_star>, sigma^2), and an attack can lower it by
at most

    rho = ||U||_{inf,1} eps ||w_hat^T U||_1          (l1_dual)
        <= k ||U||_{inf,1} eps ||w_hat^T U||_inf    (k_linf)

so the relaxed robust error is Phi((rho - margin) / sigma) and, when the
margin exceeds the k_linf penalty, it is bounded by
exp(-(margin - penalty)^2 / (2 sigma^2)). The penalty scales with k, not
sqrt(k); both norm variants are reported so the gap between them is visible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.special import erfc

from semattack.attacks import AttackConfig, semantic_attack
from semattack.data import TwoComponentSpec, sample_two_component
from semattack.errors import (
    DimensionError,
    InvalidParameterError,
    InvalidRankError,
    PreconditionError,
)
from semattack.models import LinearModel
from semattack.models.losses import label_to_index
from semattack.tensor_math import (
    SeededRng,
    as_matrix,
    as_vector,
    check_orthonormal,
    norm_l1,
    norm_linf,
    op_norm_inf_to_one,
    random_orthonormal,
)
from semattack.transforms import SUBSPACE_ADDITIVE, TransformSpec
from semattack.typing import Matrix, Vector

logger = logging.getLogger(__name__)

L1_DUAL = "l1_dual"
K_LINF = "k_linf"
NORM_VARIANTS = (L1_DUAL, K_LINF)

RELAXED_CLOSED_FORM = "relaxed_closed_form"
K1_EXACT = "k1_exact"
OPTIMIZER = "optimizer"
SOLVERS = (RELAXED_CLOSED_FORM, K1_EXACT, OPTIMIZER)

UNIT_NORM_TOLERANCE = 1e-10


def gaussian_cdf(t: float) -> float:
    # erfc keeps full relative precision in the lower tail.
    return float(0.5 * erfc(-t / math.sqrt(2.0)))


@dataclass(frozen=True)
class BoundInputs:
    w_hat: Vector
    theta_star: Vector
    U: Matrix
    eps: float
    sigma: float

    def __post_init__(self):
        w_hat = as_vector(self.w_hat, name="w_hat")
        d = w_hat.shape[0]
        theta_star = as_vector(self.theta_star, dim=d, name="theta_star")
        u = as_matrix(self.U, rows=d, name="U")
        if u.shape[1] < 1:
            raise InvalidRankError("U needs at least one column")
        if abs(np.linalg.norm(w_hat) - 1.0) > UNIT_NORM_TOLERANCE:
            raise InvalidParameterError(
                f"w_hat must have unit norm, got {np.linalg.norm(w_hat):.12g}"
            )
        if self.eps < 0:
            raise InvalidParameterError(f"eps must be non-negative, got {self.eps}")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "w_hat", w_hat)
        object.__setattr__(self, "theta_star", theta_star)
        object.__setattr__(self, "U", check_orthonormal(u))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def d(self) -> int:
        return self.w_hat.shape[0]

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def wbar(self) -> Vector:
        """w_hat^T U, the classifier seen from inside the attack subspace."""
        return self.U.T @ self.w_hat

    @property
    def margin(self) -> float:
        return float(self.w_hat @ self.theta_star)

    @cached_property
    def norm_inf1(self) -> float:
        return op_norm_inf_to_one(self.U).value

    def rho(self, norm_variant: str = L1_DUAL) -> float:
        """Largest decrease of <y x, w_hat> over the relaxed parameter box."""
        if norm_variant == L1_DUAL:
            return self.norm_inf1 * self.eps * norm_l1(self.wbar)
        if norm_variant == K_LINF:
            return self.k * self.norm_inf1 * norm_linf(self.wbar) * self.eps
        raise InvalidParameterError(
            f"unknown norm variant {norm_variant!r}; expected one of {NORM_VARIANTS}"
        )

    def with_eps(self, eps: float) -> "BoundInputs":
        return replace(self, eps=eps)


@dataclass
class BoundReport:
    """Every quantity entering the bound for one set of inputs."""

    d: int
    k: int
    eps: float
    sigma: float
    margin: float
    norm_inf1: float
    norm_inf1_exact: bool
    wbar_inf: float
    wbar_one: float
    rho_l1_dual: float
    rho_k_linf: float
    precondition_ok: bool
    bound: float | None
    exact_relaxed_error: float
    exact_relaxed_error_k_linf: float
    mc_estimate: float | None = None
    mc_standard_error: float | None = None
    mc_solver: str | None = None
    mc_n: int | None = None
    mc_seed: int | None = None
    k1_exact_estimate: float | None = None
    optimizer_estimate: float | None = None
    optimizer_n: int | None = None

    def chain_holds(self, tolerance: float = 1e-12, sigmas: float = 3.0) -> bool:
        """
        Whether mc <= exact + 3 SE <= bound + tolerance holds, and the
        optimizer estimate (if any) stays below the relaxed estimate + 3 SE.
        """
        ok = self.exact_relaxed_error <= self.exact_relaxed_error_k_linf + tolerance
        if self.bound is not None:
            ok = ok and self.exact_relaxed_error_k_linf <= self.bound + tolerance
        if self.mc_estimate is not None:
            se = self.mc_standard_error or 0.0
            ok = ok and self.mc_estimate <= self.exact_relaxed_error + sigmas * se + tolerance
        if self.k1_exact_estimate is not None and self.mc_estimate is not None:
            ok = ok and self.k1_exact_estimate <= self.mc_estimate + tolerance
        if self.optimizer_estimate is not None and self.mc_estimate is not None:
            se = binomial_standard_error(self.mc_estimate, self.optimizer_n or 1)
            ok = ok and self.optimizer_estimate <= self.mc_estimate + sigmas * se + tolerance
        return ok

    def to_dict(self) -> dict:
        document = dict(self.__dict__)
        if not self.precondition_ok:
            document["bound"] = "not covered"
        document["chain_ok"] = self.chain_holds()
        return document


def _check_precondition(inputs: BoundInputs) -> tuple[float, float]:
    lhs = inputs.margin
    rhs = inputs.rho(K_LINF)
    return lhs, rhs


def precondition_holds(inputs: BoundInputs) -> bool:
    lhs, rhs = _check_precondition(inputs)
    return lhs >= rhs


def tail_bound(
    margin: float, k: int, norm_inf1: float, wbar_inf: float, eps: float, sigma: float
) -> float:
    """
    exp(-(margin - k norm_inf1 wbar_inf eps)^2 / (2 sigma^2)).

    Only defined when the margin is at least the penalty; otherwise a
    :class:`PreconditionError` carrying both sides is raised.
    """
    penalty = k * norm_inf1 * wbar_inf * eps
    if margin < penalty:
        raise PreconditionError(
            f"margin {margin:.6g} is below the attack penalty {penalty:.6g}",
            lhs=margin,
            rhs=penalty,
        )
    return math.exp(-((margin - penalty) ** 2) / (2.0 * sigma**2))


def robust_error_bound(inputs: BoundInputs) -> float:
    return tail_bound(
        inputs.margin,
        inputs.k,
        inputs.norm_inf1,
        norm_linf(inputs.wbar),
        inputs.eps,
        inputs.sigma,
    )


def exact_relaxed_robust_error(inputs: BoundInputs, norm_variant: str = L1_DUAL) -> float:
    """Probability that <y x, w_hat> <= rho under the two-component model."""
    return gaussian_cdf((inputs.rho(norm_variant) - inputs.margin) / inputs.sigma)


def k1_subspace_feasibility(x, y: int, w_hat, u, eps: float) -> bool:
    """
    Whether some z = c u with ||z||_inf <= eps flips the sign of <x + z, w_hat>.

    The best such z moves <y x, w_hat> down by eps |<u, w_hat>| / ||u||_inf,
    so the instance is feasible exactly when that reaches zero.
    """
    u = as_vector(u, name="u")
    x = as_vector(x, dim=u.shape[0], name="x")
    w_hat = as_vector(w_hat, dim=u.shape[0], name="w_hat")
    return bool(_k1_feasible(y * x[None, :], w_hat, u, eps)[0])


def _k1_feasible(yx: np.ndarray, w_hat: Vector, u: Vector, eps: float) -> np.ndarray:
    u_inf = norm_linf(u)
    if u_inf == 0.0:
        raise InvalidParameterError("u must be non-zero")
    gain = eps * abs(float(u @ w_hat)) / u_inf
    return yx @ w_hat - gain <= 0.0


def _optimizer_failures(inputs: BoundInputs, X, y, rng: SeededRng, attack_config=None) -> np.ndarray:
    model = LinearModel(inputs.w_hat)
    half_width = inputs.norm_inf1 * inputs.eps
    spec = TransformSpec(
        kind=SUBSPACE_ADDITIVE,
        d=inputs.d,
        U=inputs.U,
        box=(-half_width, half_width),
        eps_linf=inputs.eps,
    )
    cfg = attack_config or AttackConfig(seed=rng.seed)
    clean = model.predict(X) == label_to_index(y)
    success = ~clean
    for i in np.flatnonzero(clean):
        success[i] = semantic_attack(model, spec, X[i], int(y[i]), cfg).success
    return success


def monte_carlo_robust_error(
    inputs: BoundInputs,
    n: int,
    rng: SeededRng,
    solver: str = RELAXED_CLOSED_FORM,
    attack_config=None,
) -> float:
    """
    Fraction of n draws from the two-component model that admit an attack.

    ``relaxed_closed_form`` counts draws inside the relaxed set,
    ``k1_exact`` applies the closed-form oracle (k = 1 only) and ``optimizer``
    runs the semantic attack on the linear model, which gives a lower bound on
    the true robust error.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be at least 1, got {n}")
    if solver not in SOLVERS:
        raise InvalidParameterError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    if solver == K1_EXACT and inputs.k != 1:
        raise DimensionError(f"the k1_exact solver needs k = 1, got k = {inputs.k}")

    dataset = sample_two_component(TwoComponentSpec(inputs.theta_star, inputs.sigma), n, rng)
    X, y = dataset.X, dataset.y
    yx = y[:, None] * X
    if solver == RELAXED_CLOSED_FORM:
        hits = yx @ inputs.w_hat <= inputs.rho(L1_DUAL)
    elif solver == K1_EXACT:
        hits = _k1_feasible(yx, inputs.w_hat, inputs.U[:, 0], inputs.eps)
    else:
        hits = _optimizer_failures(inputs, X, y, rng, attack_config)
    estimate = float(np.mean(hits))
    logger.debug("%s estimate %.6g over %d draws", solver, estimate, n)
    return estimate


def binomial_standard_error(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def bound_report(
    inputs: BoundInputs,
    mc_n: int | None = None,
    rng: SeededRng | None = None,
    solver: str = RELAXED_CLOSED_FORM,
    optimizer_n: int | None = None,
    attack_config=None,
) -> BoundReport:
    """
    Evaluate the bound, both exact relaxed errors and, when ``mc_n`` is given,
    a Monte Carlo estimate. Inputs that violate the precondition are reported
    with ``bound=None`` rather than raising.
    """
    margin, penalty = _check_precondition(inputs)
    try:
        bound = robust_error_bound(inputs)
        precondition_ok = True
    except PreconditionError:
        bound = None
        precondition_ok = False
        logger.warning(
            "k=%d eps=%.3g sigma=%.3g: margin %.4g below penalty %.4g, not covered by the bound",
            inputs.k,
            inputs.eps,
            inputs.sigma,
            margin,
            penalty,
        )
    norm = op_norm_inf_to_one(inputs.U)
    report = BoundReport(
        d=inputs.d,
        k=inputs.k,
        eps=inputs.eps,
        sigma=inputs.sigma,
        margin=margin,
        norm_inf1=norm.value,
        norm_inf1_exact=norm.exact,
        wbar_inf=norm_linf(inputs.wbar),
        wbar_one=norm_l1(inputs.wbar),
        rho_l1_dual=inputs.rho(L1_DUAL),
        rho_k_linf=penalty,
        precondition_ok=precondition_ok,
        bound=bound,
        exact_relaxed_error=exact_relaxed_robust_error(inputs, L1_DUAL),
        exact_relaxed_error_k_linf=exact_relaxed_robust_error(inputs, K_LINF),
    )
    if mc_n:
        rng = rng or SeededRng(0)
        estimate = monte_carlo_robust_error(inputs, mc_n, rng.spawn(0), solver)
        report.mc_estimate = estimate
        report.mc_standard_error = binomial_standard_error(estimate, mc_n)
        report.mc_solver = solver
        report.mc_n = mc_n
        report.mc_seed = rng.seed
        if inputs.k == 1 and solver != K1_EXACT:
            report.k1_exact_estimate = monte_carlo_robust_error(inputs, mc_n, rng.spawn(0), K1_EXACT)
    if optimizer_n:
        rng = rng or SeededRng(0)
        report.optimizer_estimate = monte_carlo_robust_error(
            inputs, optimizer_n, rng.spawn(1), OPTIMIZER, attack_config
        )
        report.optimizer_n = optimizer_n
    return report


def random_bound_inputs(d: int, k: int, rng: SeededRng) -> BoundInputs:
    """
    Draw inputs that satisfy the precondition: a random unit w_hat, a random
    basis, a theta_star whose margin clears the penalty, and random eps, sigma.
    """
    w_hat = rng.normal(d)
    w_hat /= np.linalg.norm(w_hat)
    U = random_orthonormal(d, k, rng)
    eps = float(rng.uniform(0.0, 0.5))
    sigma = float(rng.uniform(0.2, 2.0))
    draft = BoundInputs(w_hat=w_hat, theta_star=np.zeros(d), U=U, eps=eps, sigma=sigma)
    margin = draft.rho(K_LINF) + float(rng.uniform(0.01, 3.0)) * sigma
    return replace(draft, theta_star=margin * w_hat)
