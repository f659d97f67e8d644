"""Flat ``key = value`` configuration files.

Values are parsed as JSON literals with a fallback to the bare string, so
`learning_rate = 0.001`, `optimizer = adam-style` and `filler_chars = "abc"`
all read naturally.  Blank lines and '#' comments are ignored.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Mapping, TypeVar

__all__ = ["load_config", "save_config", "dataclass_from_mapping", "known_keys"]

T = TypeVar("T")


def load_config(path: str | Path) -> dict[str, object]:
    entries: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        value = value.strip()
        try:
            entries[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            entries[key.strip()] = value
    return entries


def save_config(path: str | Path, entries: Mapping[str, object]) -> None:
    lines = []
    for key, value in entries.items():
        if isinstance(value, str):
            lines.append(f"{key} = {value}")
        else:
            lines.append(f"{key} = {json.dumps(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def known_keys(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def dataclass_from_mapping(cls: type[T], mapping: Mapping[str, object]) -> T:
    """Build a dataclass from the mapping's matching keys, coercing lists to
    tuples for tuple-typed fields; extra keys are left for other consumers."""
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in mapping:
            continue
        value = mapping[f.name]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)
