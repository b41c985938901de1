"""Frozen corpus constants (constants.json next to this module)."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

from .errors import ConsistencyError

PATH = Path(__file__).with_name("constants.json")


@lru_cache(maxsize=1)
def load_constants() -> dict:
    if not PATH.exists():
        return {}
    with open(PATH) as fh:
        rows = json.load(fh)
    return {row["name"]: row for row in rows}


def get_constant(name: str) -> float:
    rows = load_constants()
    if name not in rows:
        raise ConsistencyError(f"constant {name!r} missing from {PATH.name}; run the calibration")
    return float(rows[name]["value"])
