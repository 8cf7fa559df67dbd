"""Ordered batch execution over a thread pool.

The pipeline is pure, so images can be processed concurrently. Results come
back in input order; a failing item yields its exception instead of aborting
the batch.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Generic, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


@dataclass
class BatchOutcome(Generic[T, R]):
    item: T
    result: Optional[R] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_batch(
    items: Sequence[T],
    task: Callable[[T], R],
    max_workers: int = 1,
) -> List[BatchOutcome[T, R]]:
    """
    Apply ``task`` to every item and return one outcome per item, in order.

    Args:
        items: Work items (typically input paths)
        task: Function run once per item
        max_workers: Thread cap; 1 runs inline on the calling thread
    """
    if max_workers <= 1 or len(items) <= 1:
        return [_run_one(item, task) for item in items]

    outcomes: List[BatchOutcome[T, R]] = []
    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as executor:
        futures = [(item, executor.submit(task, item)) for item in items]
        for item, future in futures:
            try:
                outcomes.append(BatchOutcome(item, result=future.result()))
            except Exception as e:
                logger.warning(f"Skipping {item}: {e}")
                outcomes.append(BatchOutcome(item, error=e))

    failed = sum(1 for o in outcomes if not o.ok)
    logger.info(f"Batch finished: {len(outcomes) - failed} ok, {failed} failed")
    return outcomes


def _run_one(item, task) -> BatchOutcome:
    try:
        return BatchOutcome(item, result=task(item))
    except Exception as e:
        logger.warning(f"Skipping {item}: {e}")
        return BatchOutcome(item, error=e)
