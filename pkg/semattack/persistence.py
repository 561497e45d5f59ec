"""Atomic JSON/text writes shared by datasets, checkpoints and run outputs."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path: str | Path, document: Any, indent: int | None = None) -> Path:
    # Python floats serialize with repr, which round-trips float64 exactly.
    return atomic_write_text(path, json.dumps(document, indent=indent) + "\n")


def read_json(path: str | Path) -> Any:
    with open(path) as f:
        return json.load(f)
