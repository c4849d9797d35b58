import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "RESTRICTLAB_THREADS"


def thread_count(threads=None):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(ENV_THREADS)
    if env:
        return max(1, int(env))
    return 1


def ordered_map(fn, items, threads=None):
    """``list(map(fn, items))`` on a thread pool; output order matches input order."""
    items = list(items)
    n = thread_count(threads)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
