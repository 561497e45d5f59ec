"""
Parametric input transforms G(x, delta).

Four families are supported:

- ``pixel_additive``: x + delta, delta in R^d.
- ``subspace_additive``: x + U delta, delta in R^k, U a d x k orthonormal basis.
- ``rank_multiplicative``: U diag(delta) U^T x, a rank-k reweighting.
- ``affine_spatial``: rotation (degrees) and integer shifts of x viewed as a
  square image. It is evaluated only, never differentiated.

Any of them may be rectified (x_tilde = ReLU(G(x, delta))). Differentiable
kinds expose a vector-Jacobian product with respect to delta so attacks can
back-propagate through the classifier and the transform together.

Specs may also be attribute-encoded: the optimized vector is then an
attribute vector ``a`` which is clamped to the parameter box, mapped to
(1 - a_i, a_i) pairs, and read out linearly into delta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage

from semattack.errors import (
    DimensionError,
    InvalidParameterError,
    UnsupportedTransformError,
)
from semattack.persistence import read_json, write_json
from semattack.tensor_math import as_matrix, as_vector, check_orthonormal, norm_linf
from semattack.typing import Matrix, Vector

logger = logging.getLogger(__name__)

PIXEL_ADDITIVE = "pixel_additive"
SUBSPACE_ADDITIVE = "subspace_additive"
RANK_MULTIPLICATIVE = "rank_multiplicative"
AFFINE_SPATIAL = "affine_spatial"
TRANSFORM_KINDS = (PIXEL_ADDITIVE, SUBSPACE_ADDITIVE, RANK_MULTIPLICATIVE, AFFINE_SPATIAL)
ADDITIVE_KINDS = (PIXEL_ADDITIVE, SUBSPACE_ADDITIVE)
BASIS_KINDS = (SUBSPACE_ADDITIVE, RANK_MULTIPLICATIVE)

DEFAULT_BOX = (-3.0, 3.0)
PROJECTION_STEPS = 60
BACKTRACK_FACTOR = 0.5


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    d: int
    U: Matrix | None = None
    rectified: bool = False
    box: tuple[float, float] = DEFAULT_BOX
    eps_linf: float | None = None
    seed: int | None = None
    encoded: bool = False
    readout: tuple[float, float] = (0.0, 1.0)
    active: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise InvalidParameterError(
                f"unknown transform kind {self.kind!r}; expected one of {TRANSFORM_KINDS}"
            )
        low, high = (float(b) for b in self.box)
        if low > high:
            raise InvalidParameterError(f"box lower bound {low} exceeds upper bound {high}")
        object.__setattr__(self, "box", (low, high))
        if self.eps_linf is not None and self.eps_linf < 0:
            raise InvalidParameterError(f"eps_linf must be non-negative, got {self.eps_linf}")

        if self.kind in BASIS_KINDS:
            if self.U is None:
                raise InvalidParameterError(f"{self.kind} transforms need a basis U")
            u = as_matrix(self.U, rows=self.d, name="U")
            object.__setattr__(self, "U", check_orthonormal(u))
        elif self.U is not None:
            raise InvalidParameterError(f"{self.kind} transforms take no basis")
        if self.kind == AFFINE_SPATIAL and math.isqrt(self.d) ** 2 != self.d:
            raise DimensionError(f"affine_spatial needs a square image, d={self.d}")

        if self.encoded and self.kind not in BASIS_KINDS:
            raise InvalidParameterError("attribute encoding applies to subspace and multiplicative kinds")
        if self.encoded and self.readout[0] == self.readout[1]:
            raise InvalidParameterError("readout weights must differ")
        if self.active is not None:
            active = tuple(sorted({int(i) for i in self.active}))
            if not active or active[0] < 0 or active[-1] >= self.param_count:
                raise InvalidParameterError(
                    f"active parameters {self.active} out of range for {self.param_count}"
                )
            object.__setattr__(self, "active", active)

    @property
    def k(self) -> int:
        if self.kind in BASIS_KINDS:
            return self.U.shape[1]
        return self.param_count

    @property
    def param_count(self) -> int:
        if self.kind in BASIS_KINDS:
            return self.U.shape[1]
        if self.kind == PIXEL_ADDITIVE:
            return self.d
        return 3

    @property
    def differentiable(self) -> bool:
        return self.kind != AFFINE_SPATIAL

    def identity_delta(self) -> Vector:
        """Transform parameters that leave x unchanged (on col(U) for multiplicative)."""
        if self.kind == RANK_MULTIPLICATIVE:
            return np.ones(self.param_count)
        return np.zeros(self.param_count)

    def identity_params(self) -> Vector:
        """The optimized vector (attributes when encoded) mapping to ``identity_delta``."""
        if not self.encoded:
            return self.identity_delta()
        w_off, w_on = self.readout
        return (self.identity_delta() - w_off) / (w_on - w_off)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "k": self.k,
            "U": None if self.U is None else self.U.tolist(),
            "rectified": self.rectified,
            "box": list(self.box),
            "eps_linf": self.eps_linf,
            "seed": self.seed,
            "encoded": self.encoded,
            "readout": list(self.readout),
            "active": None if self.active is None else list(self.active),
        }

    @classmethod
    def from_dict(cls, document: dict) -> "TransformSpec":
        u = document.get("U")
        return cls(
            kind=document["kind"],
            d=int(document["d"]),
            U=None if u is None else np.asarray(u, dtype=np.float64),
            rectified=bool(document.get("rectified", False)),
            box=tuple(document.get("box", DEFAULT_BOX)),
            eps_linf=document.get("eps_linf"),
            seed=document.get("seed"),
            encoded=bool(document.get("encoded", False)),
            readout=tuple(document.get("readout", (0.0, 1.0))),
            active=document.get("active"),
        )


def save_transform(spec: TransformSpec, path: str | Path) -> Path:
    return write_json(path, spec.to_dict())


def load_transform(path: str | Path) -> TransformSpec:
    return TransformSpec.from_dict(read_json(path))


@dataclass(frozen=True)
class EncodedAttributes:
    tuples: Matrix
    clamped: np.ndarray = field(repr=False)

    @property
    def off(self) -> Vector:
        return self.tuples[:, 0]

    @property
    def on(self) -> Vector:
        return self.tuples[:, 1]

    def flat(self) -> Vector:
        return self.tuples.ravel()

    def jacobian(self) -> Matrix:
        """d(off, on)/da per attribute: (-1, +1), zero where clamping is active."""
        pass_through = (~self.clamped).astype(np.float64)
        return np.stack([-pass_through, pass_through], axis=1)


def attribute_encode(a, box: tuple[float, float] = DEFAULT_BOX) -> EncodedAttributes:
    """Clamp each attribute to ``box`` and emit the (1 - a_i, a_i) tuples."""
    low, high = box
    if low > high:
        raise InvalidParameterError(f"box lower bound {low} exceeds upper bound {high}")
    a = as_vector(a, name="attributes")
    clamped = (a < low) | (a > high)
    a = np.clip(a, low, high)
    return EncodedAttributes(tuples=np.stack([1.0 - a, a], axis=1), clamped=clamped)


def decode_params(spec: TransformSpec, params: Vector) -> Vector:
    """Map the optimized vector to transform parameters delta."""
    if not spec.encoded:
        return params
    encoded = attribute_encode(params, spec.box)
    w_off, w_on = spec.readout
    return w_off * encoded.off + w_on * encoded.on


def decode_vjp(spec: TransformSpec, params: Vector, upstream: Vector) -> Vector:
    if not spec.encoded:
        return upstream
    w_off, w_on = spec.readout
    jacobian = attribute_encode(params, spec.box).jacobian()
    return upstream * (w_off * jacobian[:, 0] + w_on * jacobian[:, 1])


def _check_inputs(spec: TransformSpec, x, delta) -> tuple[Vector, Vector]:
    x = as_vector(x, dim=spec.d, name="x")
    delta = as_vector(delta, dim=spec.param_count, name="delta")
    return x, delta


def _affine(spec: TransformSpec, x: Vector, delta: Vector) -> Vector:
    rotation, shift_x, shift_y = float(delta[0]), round(delta[1]), round(delta[2])
    side = math.isqrt(spec.d)
    image = x.reshape(side, side)
    if rotation != 0.0:
        image = ndimage.rotate(image, rotation, reshape=False, order=1, mode="constant", cval=0.0)
    if shift_x != 0 or shift_y != 0:
        image = ndimage.shift(image, (shift_y, shift_x), order=0, mode="constant", cval=0.0)
    return np.array(image, dtype=np.float64).ravel()


def pre_activation(spec: TransformSpec, x: Vector, delta: Vector) -> Vector:
    """G(x, delta) before rectification."""
    if spec.kind == PIXEL_ADDITIVE:
        return x + delta
    if spec.kind == SUBSPACE_ADDITIVE:
        return x + spec.U @ delta
    if spec.kind == RANK_MULTIPLICATIVE:
        return spec.U @ (delta * (spec.U.T @ x))
    return _affine(spec, x, delta)


def transform_forward(spec: TransformSpec, x, delta) -> Vector:
    x, delta = _check_inputs(spec, x, delta)
    out = pre_activation(spec, x, delta)
    if spec.rectified:
        out = np.maximum(out, 0.0)
    return out


def transform_vjp(spec: TransformSpec, x, delta, upstream) -> Vector:
    """J^T upstream with J = d x_tilde / d delta."""
    if not spec.differentiable:
        raise UnsupportedTransformError(f"{spec.kind} is grid-searched and has no gradient")
    x, delta = _check_inputs(spec, x, delta)
    upstream = as_vector(upstream, dim=spec.d, name="upstream")
    if spec.rectified:
        upstream = upstream * (pre_activation(spec, x, delta) > 0)
    if spec.kind == PIXEL_ADDITIVE:
        grad = upstream.copy()
    elif spec.kind == SUBSPACE_ADDITIVE:
        grad = spec.U.T @ upstream
    else:
        grad = (spec.U.T @ upstream) * (spec.U.T @ x)
    return mask_inactive(spec, grad)


def mask_inactive(spec: TransformSpec, grad: Vector) -> Vector:
    if spec.active is None:
        return grad
    masked = np.zeros_like(grad)
    masked[list(spec.active)] = grad[list(spec.active)]
    return masked


def budget_distance(spec: TransformSpec, x: Vector, params: Vector) -> float:
    """
    Image-space size of the perturbation that ``eps_linf`` bounds.

    Measured on the unrectified transform against its identity output, so it
    is ||U delta||_inf for additive kinds and ||U diag(delta - 1) U^T x||_inf
    for multiplicative ones.
    """
    delta = decode_params(spec, params)
    if spec.kind == PIXEL_ADDITIVE:
        return norm_linf(delta)
    if spec.kind == SUBSPACE_ADDITIVE:
        return norm_linf(spec.U @ delta)
    if spec.kind == RANK_MULTIPLICATIVE:
        return norm_linf(spec.U @ ((delta - 1.0) * (spec.U.T @ x)))
    return norm_linf(_affine(spec, x, delta) - x)


def _bisect_scale(within: Callable[[float], bool]) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(PROJECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if within(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _backtrack_scale(within: Callable[[float], bool]) -> float:
    t = 1.0
    for _ in range(PROJECTION_STEPS):
        t *= BACKTRACK_FACTOR
        if within(t):
            return t
    return 0.0


def project_params(spec: TransformSpec, params, x=None) -> Vector:
    """
    Project the optimized vector onto the feasible set.

    Parameters are clamped to the box and inactive ones reset to the
    identity. When ``eps_linf`` is set (and ``x`` is given for kinds whose
    budget depends on it), the vector is then pulled toward the box-clamped
    identity: pixel perturbations are clipped coordinate-wise, additive kinds
    are rescaled by bisection on a scalar multiplier and multiplicative kinds
    by halving backtracking.
    """
    low, high = spec.box
    params = np.clip(as_vector(params, dim=spec.param_count, name="params"), low, high)
    anchor = np.clip(spec.identity_params(), low, high)
    if spec.active is not None:
        inactive = np.ones(spec.param_count, dtype=bool)
        inactive[list(spec.active)] = False
        params[inactive] = anchor[inactive]
    if spec.eps_linf is None:
        return params

    eps = spec.eps_linf
    if spec.kind == PIXEL_ADDITIVE and not spec.encoded:
        return np.clip(params, max(low, -eps), min(high, eps))
    if x is None:
        raise DimensionError(f"projecting a {spec.kind} spec with eps_linf needs the input x")
    x = as_vector(x, dim=spec.d, name="x")
    if budget_distance(spec, x, params) <= eps:
        return params

    step = params - anchor

    def within(t: float) -> bool:
        return budget_distance(spec, x, anchor + t * step) <= eps

    if spec.kind in ADDITIVE_KINDS:
        t = _bisect_scale(within)
    else:
        t = _backtrack_scale(within)
        if t == 0.0 and not within(0.0):
            logger.debug("identity parameters already exceed eps_linf=%.3g", eps)
    return anchor + t * step


def binding_constraints(spec: TransformSpec, params: Vector, x: Vector, tol: float = 1e-9) -> str:
    """Which feasibility constraints are tight at ``params``: none, box, eps_linf or both."""
    low, high = spec.box
    on_box = bool(np.any(params <= low + tol) or np.any(params >= high - tol)) and low < high
    on_eps = spec.eps_linf is not None and budget_distance(spec, x, params) >= spec.eps_linf - tol
    if on_box and on_eps:
        return "both"
    if on_eps:
        return "eps_linf"
    if on_box:
        return "box"
    return "none"
