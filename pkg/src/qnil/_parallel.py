from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

ENV_THREADS = "QNIL_THREADS"

_default_threads: int | None = None


def set_default_threads(n: int | None) -> None:
    global _default_threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = n


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    if _default_threads is not None:
        return _default_threads
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    return 1


def ordered_map(func: Callable, items: Sequence, threads: int | None = None) -> list:
    """``list(map(func, items))``, optionally on a thread pool; order is preserved."""
    n = thread_count(threads)
    if n == 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
