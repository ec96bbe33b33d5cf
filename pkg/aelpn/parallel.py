"""Chunked evaluation over stacks of signals, optionally on a thread pool"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "AELPN_THREADS"
DEFAULT_CHUNK = 256


def evaluation_workers() -> int:
    """Worker count from AELPN_THREADS; unset or invalid means 1"""
    raw = os.getenv(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer", THREADS_ENV, raw)
        return 1
    return max(1, workers)


def map_rows(
    fn: Callable[[np.ndarray], np.ndarray],
    rows: np.ndarray,
    chunk_size: int = DEFAULT_CHUNK,
    workers: Optional[int] = None,
) -> np.ndarray:
    """
    Apply ``fn`` to consecutive row chunks and concatenate in input order

    Results are assembled in chunk order whatever the completion order, so the
    output does not depend on the worker count.
    """
    rows = np.atleast_2d(rows)
    chunks = [rows[i:i + chunk_size] for i in range(0, rows.shape[0], chunk_size)]
    workers = evaluation_workers() if workers is None else max(1, workers)
    if workers == 1 or len(chunks) == 1:
        parts = [np.asarray(fn(chunk)) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = [np.asarray(p) for p in pool.map(fn, chunks)]
    return np.concatenate(parts, axis=0)
