"""Ordered process-pool map used by every sweep."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_WORKERS = "TOPOCRIT_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(ENV_WORKERS, "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{ENV_WORKERS} must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items, workers=1):
    """``[fn(x) for x in items]``, optionally across processes.

    Results always come back in input order.  With ``workers > 1`` both
    ``fn`` and the items must be picklable (top-level functions or
    ``functools.partial`` of them).
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))
