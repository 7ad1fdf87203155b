"""Process-pool fan-out for replicates and backtest blocks."""

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from run_logger import get_logger

logger = get_logger("parallel")

THREADS_ENV = "SPIKESLAB_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    """Worker count from SPIKESLAB_THREADS, 1 when unset or invalid."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV}={raw!r}")
        return 1
    return max(value, 1)


def map_tasks(worker: Callable[[T], R], tasks: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """Apply ``worker`` to every task, in task order.

    ``worker`` must be a module-level function so it pickles under the spawn
    start method. One worker (or one task) runs inline.
    """
    workers = default_workers() if workers is None else max(int(workers), 1)
    workers = min(workers, len(tasks)) if tasks else 1
    if workers <= 1:
        return [worker(task) for task in tasks]

    logger.debug(f"Running {len(tasks)} tasks on {workers} processes")
    ctx = mp.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(worker, tasks))
