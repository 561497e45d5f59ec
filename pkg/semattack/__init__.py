"""semattack: semantic adversarial attacks on a mixture-of-Gaussians testbed."""

__version__ = "0.1.0"

from .system import AttackLab

__all__ = ["AttackLab", "__version__"]
