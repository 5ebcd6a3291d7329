"""Trial-level task pool.  Results come back in trial order whatever the schedule."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def default_threads() -> int:
    env = os.environ.get("RMT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"RMT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("RMT_THREADS must be positive")
        return n
    return os.cpu_count() or 1


_threads = None


def set_threads(n):
    global _threads
    _threads = n


def map_trials(fn, trials, threads=None):
    n = threads or _threads or default_threads()
    items = list(trials)
    if n <= 1 or len(items) <= 1:
        return [fn(k) for k in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
