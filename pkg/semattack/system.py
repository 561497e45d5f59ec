"""
The attack laboratory: default parameters and the overrides applied to them.

This module defines the lab class that loads every default from the YAML
parameter tree under ``parameters/`` and applies run-specific overrides on
top of a clone of it, the way a reform is applied to a baseline system.
"""

from __future__ import annotations

import copy
import logging
from pathlib import Path
from typing import Any, Iterator, Mapping

from policyengine_core.parameters import Parameter, ParameterNode
from policyengine_core.periods import instant

from semattack.errors import ConfigError

logger = logging.getLogger(__name__)

PACKAGE_DIR = Path(__file__).parent

# Each leaf holds one dated entry; the lab reads the tree at that date.
DEFAULTS_INSTANT = instant("2000-01-01")


def _walk(node: ParameterNode, key: str) -> ParameterNode | Parameter:
    current: ParameterNode | Parameter = node
    for part in key.split("."):
        if not isinstance(current, ParameterNode) or part not in current.children:
            raise ConfigError(f"unknown parameter {key!r}")
        current = current.children[part]
    return current


def _plain(node: ParameterNode | Parameter) -> Any:
    if isinstance(node, Parameter):
        return copy.deepcopy(node(DEFAULTS_INSTANT))
    return {key: _plain(child) for key, child in node.children.items()}


class AttackLab:
    """
    The parameter system of the laboratory.

    Loads the default tree once, then applies a mapping of dotted-key
    overrides (``{"attacks.semantic.lr": 0.05}``) to a clone of it to produce
    the values a run uses. The defaults themselves are never mutated.
    """

    parameters_dir = PACKAGE_DIR / "parameters"

    def __init__(self, overrides: Mapping[str, Any] | None = None):
        self.parameters = ParameterNode("", directory_path=str(self.parameters_dir))
        self.overrides = dict(overrides or {})
        self.tree = self.parameters.clone()
        for key, value in self.overrides.items():
            parameter = _walk(self.tree, key)
            if not isinstance(parameter, Parameter):
                raise ConfigError(f"{key!r} is a group, not a parameter")
            try:
                parameter.update(start=DEFAULTS_INSTANT, value=value)
            except ValueError as e:
                raise ConfigError(f"invalid value for {key!r}: {e}") from e
        if self.overrides:
            logger.debug("Applied %d parameter overrides", len(self.overrides))

    def leaves(self) -> Iterator[Parameter]:
        for descendant in self.parameters.get_descendants():
            if isinstance(descendant, Parameter):
                yield descendant

    def values(self) -> dict:
        """Nested plain values after overrides."""
        return _plain(self.tree)

    def get(self, key: str) -> Any:
        return _plain(_walk(self.tree, key))

    def describe(self, key: str) -> Parameter:
        parameter = _walk(self.parameters, key)
        if not isinstance(parameter, Parameter):
            raise ConfigError(f"{key!r} is a group, not a parameter")
        return parameter
