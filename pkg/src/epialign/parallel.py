"""Worker-pool helpers honouring the EPIALIGN_THREADS environment variable."""

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_VAR = "EPIALIGN_THREADS"


def worker_count() -> int:
    """Number of worker threads: EPIALIGN_THREADS, with 0 or unset meaning auto."""
    raw = os.environ.get(_ENV_VAR, "0").strip()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        return os.cpu_count() or 1
    return n


def map_ordered(fn, items):
    """Apply ``fn`` to every item, returning results in input order.

    Uses a thread pool when more than one worker is configured. Results are
    assembled in input order so downstream reductions are run-to-run
    deterministic regardless of the worker count.
    """
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
