"""Replica-parallel map with results that do not depend on the worker count.

Replicas are cut into fixed chunks (the chunk size never depends on the
number of workers); every chunk is a pure function of (start, count) and the
per-chunk results are returned in chunk order.
"""
from __future__ import annotations

import multiprocessing as mp
import os
from contextlib import contextmanager

CHUNK = 4096
_workers = int(os.environ.get("PERCOLAB_WORKERS", "1") or 1)


def get_workers() -> int:
    return _workers


def set_workers(n: int) -> None:
    global _workers
    if int(n) < 1:
        raise ValueError("workers must be >= 1")
    _workers = int(n)


@contextmanager
def workers(n: int):
    """Temporarily set the default worker count."""
    old = _workers
    set_workers(n)
    try:
        yield
    finally:
        set_workers(old)


def chunks(n: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(s, min(chunk, n - s)) for s in range(0, n, chunk)]


# the task being mapped; forked workers inherit it, so fn and args need not pickle
_task = None


def _call(job):
    global _workers
    _workers = 1  # no nested pools inside a worker
    fn, args = _task
    start, count = job
    return fn(start, count, *args)


def chunk_map(fn, n: int, args: tuple = (), chunk: int = CHUNK, n_workers: int | None = None) -> list:
    """[fn(start, count, *args) for each chunk of range(n)], in chunk order."""
    global _task
    jobs = chunks(n, chunk)
    w = get_workers() if n_workers is None else int(n_workers)
    if w <= 1 or len(jobs) <= 1:
        return [fn(s, c, *args) for s, c in jobs]
    old = _task
    _task = (fn, args)
    try:
        ctx = mp.get_context("fork")
        with ctx.Pool(min(w, len(jobs))) as pool:
            return pool.map(_call, jobs, chunksize=1)
    finally:
        _task = old
