"""Worker-thread resolution for the few parallelizable hot spots.

The count comes from, in order: an explicit ``set_workers`` call (the CLI
wires ``--threads`` here), the ``DYNAMO_THREADS`` environment variable,
or all available CPUs.  Zero means auto.
"""

from __future__ import annotations

import os

_workers: int = 0


def set_workers(n: int) -> None:
    global _workers
    _workers = max(0, int(n))


def get_workers() -> int:
    """Resolved worker count, always >= 1."""
    n = _workers
    if n == 0:
        env = os.environ.get("DYNAMO_THREADS", "")
        if env.isdigit():
            n = int(env)
    if n == 0:
        n = os.cpu_count() or 1
    return n
