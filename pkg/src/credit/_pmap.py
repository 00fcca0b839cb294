"""Deterministic fan-out helper.

Work items are independent and results are reassembled in submission order,
so the outcome is bit-identical whatever the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import ParamError

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "CREDIT_THREADS"


def resolve_threads(requested: int | None) -> int:
    """CLI precedence: explicit flag, then CREDIT_THREADS, then 1."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV_VAR)
        if raw is None:
            return 1
        try:
            requested = int(raw)
        except ValueError:
            raise ParamError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if requested < 1:
        raise ParamError(f"thread count must be >= 1, got {requested}")
    return requested


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], threads: int = 1) -> list[R]:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
