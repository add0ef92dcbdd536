"""Small shared helpers: exact rationals in JSON, canonical dumps, ordered parallel map."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def parse_scalar(text: str) -> Fraction:
    """Parse a decimal or integer literal into an exact Fraction."""
    return Fraction(text.strip())


def number_to_json(x):
    """Encode a number so it round-trips exactly (Fractions become 'p/q' strings)."""
    if isinstance(x, bool):
        raise TypeError("booleans are not metric values")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return int(x)
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return x
    raise TypeError(f"unsupported numeric type: {type(x)!r}")


def number_from_json(obj) -> int | float | Fraction:
    if isinstance(obj, str):
        num, _, den = obj.partition("/")
        return Fraction(int(num), int(den))
    if isinstance(obj, (int, float)):
        return obj
    raise ValueError(f"not a number encoding: {obj!r}")


def canonical_dumps(payload) -> str:
    """Deterministic JSON text: sorted keys, stable separators, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def ceil_scalar(x) -> int:
    return math.ceil(x)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Apply fn to items, preserving order; threads > 1 uses a pool.

    Results are collected by index so the output never depends on scheduling.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
