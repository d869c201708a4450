"""Deterministic text output: floats at 17 significant digits everywhere so
reports round-trip exactly and diff cleanly."""

from __future__ import annotations

import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable


def fmt(x: Any) -> str:
    """Render a scalar for CSV/JSON output."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            raise ValueError("refusing to serialise NaN")
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        if x == 0.0:
            x = 0.0  # normalise -0.0
        return format(x, ".17g")
    raise TypeError(f"no formatting rule for {type(x)!r}")


def json_dumps(obj: Any, indent: int = 0) -> str:
    """JSON with .17g floats (the stdlib encoder offers no float control)."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}"{key}": {json_dumps(val, indent + 2)}' for key, val in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [json_dumps(v, indent + 2) for v in obj]
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(inner + p for p in parts) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    return fmt(obj)


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json_dumps(obj) + "\n")


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]], stamp: bool = True) -> None:
    lines = []
    if stamp:
        lines.append(f"# generated {timestamp()}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, str) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
