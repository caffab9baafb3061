import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "NOISEMAP_THREADS"


def max_workers():
    try:
        return max(1, int(os.environ.get(ENV_THREADS, "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """``list(map(fn, items))``, threaded up to ``NOISEMAP_THREADS`` workers."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))
