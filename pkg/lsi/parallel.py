import os
import logging

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_thread_count: Optional[int] = None


def thread_count() -> int:
    """Worker count: explicit setting, then LSI_THREADS, then the machine."""
    if _thread_count is not None:
        return _thread_count

    env = os.environ.get("LSI_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            logger.warning("Ignoring non-integer LSI_THREADS=%r", env)
        else:
            if value >= 1:
                return value
            logger.warning("Ignoring LSI_THREADS=%r (must be >= 1)", env)

    return os.cpu_count() or 1


def set_thread_count(value: Optional[int]) -> None:
    global _thread_count

    if value is not None:
        if not isinstance(value, int) or isinstance(value, bool):
            raise TypeError("thread count must be an integer")
        if value < 1:
            raise ValueError("thread count must be >= 1")

    _thread_count = value


def ordered_map(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """
    Map over items on the worker pool. Results come back in input order,
    so reductions over them do not depend on completion order.
    """
    items = list(items)
    workers = min(thread_count(), len(items))

    if workers <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
