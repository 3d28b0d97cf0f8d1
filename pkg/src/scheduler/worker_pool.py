import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from ..config.settings import settings

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Runs independent numerical tasks on a capped number of threads.

    Results always come back in input order, so output never depends on
    scheduling. With one thread everything runs serially in the caller.
    """

    def __init__(self, threads: Optional[int] = None):
        self.threads = settings.resolve_threads(threads)
        self.logger = logging.getLogger(__name__)
        self._executor: Optional[ThreadPoolExecutor] = None

    def __enter__(self) -> "WorkerPool":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def start(self) -> None:
        """Start the thread pool"""
        if self.threads > 1 and self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="palm")
            self.logger.debug(f"Worker pool started with {self.threads} threads")

    def stop(self) -> None:
        """Stop the thread pool"""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
            self.logger.debug("Worker pool stopped")

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply fn to every item, in order"""
        items = list(items)
        if self._executor is None or len(items) < 2:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))


def serial_pool() -> WorkerPool:
    return WorkerPool(threads=1)
