"""Small shared helpers."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def indexed_map(fn, n_items, threads=1):
    """Evaluate fn(i) for i in range(n_items), assembled in index order.

    The compiled kernels release the GIL, so worker threads overlap; results
    are identical for any thread count because each item is independent and
    assembly is by index.
    """
    if threads <= 1 or n_items <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_items)))
