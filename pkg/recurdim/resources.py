# recurdim/resources.py
import logging
import os
from typing import Optional

import psutil

from recurdim.errors import BudgetExceeded

logger = logging.getLogger(__name__)

WORKERS_ENV = "RECURDIM_WORKERS"
# float64 arrays kept per cylinder in a vectorized level
LEVEL_FLOAT_ARRAYS = 10
MEMORY_HEADROOM = 0.5


def format_bytes(b: Optional[float]) -> str:
    if b is None or b == 0:
        return "0 B"
    power, n = 1024, 0
    units = ("B", "K", "M", "G", "T")
    while b >= power and n < len(units) - 1:
        b /= power
        n += 1
    return f"{b:.1f}{units[n]}"


def default_workers() -> int:
    """Worker count from the environment, else the physical core count."""
    env_value = os.environ.get(WORKERS_ENV, "").strip()
    if env_value:
        try:
            workers = int(env_value)
            if workers >= 1:
                return workers
        except ValueError:
            pass
        logger.warning(f"Ignoring invalid {WORKERS_ENV}={env_value!r}")
    cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return max(1, int(cores))


def level_footprint(count: int, depth: int) -> int:
    return count * (LEVEL_FLOAT_ARRAYS * 8 + depth)


def ensure_level_fits(count: int, depth: int) -> None:
    """Refuse a level whose arrays would not fit in available memory."""
    needed = level_footprint(count, depth)
    available = psutil.virtual_memory().available
    if needed > available * MEMORY_HEADROOM:
        raise BudgetExceeded(
            f"depth-{depth} level of {count} cylinders needs {format_bytes(needed)}, "
            f"only {format_bytes(available)} available"
        )
    logger.debug(f"Depth-{depth} level: {count} cylinders, {format_bytes(needed)}")
