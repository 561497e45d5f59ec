"""
Bias-corrected Adam.

The state is kept apart from the parameters so a fresh state can be attached
to any parameter dictionary: one per training run, one per attacked sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semattack.errors import DimensionError, InvalidParameterError


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_adam: float = 1e-8
    t: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidParameterError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidParameterError("Adam betas must lie in [0, 1)")

    def fresh(self) -> "AdamState":
        """Same hyperparameters, zero moments and step count."""
        return AdamState(self.lr, self.beta1, self.beta2, self.epsilon_adam)


def adam_step(
    state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """Apply one Adam update to ``params`` in place and return them."""
    if params.keys() != grads.keys():
        raise DimensionError(
            f"parameter names {sorted(params)} do not match gradient names {sorted(grads)}"
        )
    for name, value in params.items():
        if np.shape(grads[name]) != np.shape(value):
            raise DimensionError(
                f"gradient for {name!r} has shape {np.shape(grads[name])}, "
                f"parameter has {np.shape(value)}"
            )

    state.t += 1
    bias1 = 1.0 - state.beta1**state.t
    bias2 = 1.0 - state.beta2**state.t
    for name, value in params.items():
        g = grads[name]
        if name not in state.first_moment:
            state.first_moment[name] = np.zeros_like(value)
            state.second_moment[name] = np.zeros_like(value)
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        value -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon_adam)
    return params
