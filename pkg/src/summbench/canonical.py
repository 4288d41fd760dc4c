"""Deterministic serialization helpers shared by every output format.

All files the framework writes (manifests, result streams, reports) go
through these functions so that identical in-memory values always produce
byte-identical output: keys sorted, floats at 6 significant digits.
"""

from __future__ import annotations

import json
from typing import Any

SIGNIFICANT_DIGITS = 6


def round_float(value: float) -> float:
    """Round to 6 significant digits; parses back within 5e-7 relative."""
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite float cannot be serialized: {value!r}")
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def round_floats(obj: Any) -> Any:
    """Recursively round every float in a JSON-like structure."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return round_float(obj)
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def json_dumps(obj: Any) -> str:
    """Canonical JSON: UTF-8-safe, sorted keys, rounded floats, no padding."""
    return json.dumps(round_floats(obj), sort_keys=True, ensure_ascii=False,
                      separators=(",", ": "))


def json_line(obj: Any) -> str:
    return json_dumps(obj) + "\n"
