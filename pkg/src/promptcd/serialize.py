"""Byte-stable JSON encoding for reports and metrics files."""

from __future__ import annotations

import json

import numpy as np

from .errors import InputError


def dumps_stable(value) -> str:
    """JSON with sorted keys and fixed 6-decimal floats.

    Repeated runs with identical data produce identical bytes on every
    platform, which the report and metrics contracts rely on.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6f}"
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    if isinstance(value, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {dumps_stable(v)}" for k, v in sorted(value.items())
        )
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(dumps_stable(v) for v in value) + "]"
    raise InputError(f"cannot serialize value of type {type(value).__name__}")
