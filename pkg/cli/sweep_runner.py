"""
Parallel evaluation of r-sweeps.
Points run on a bounded thread pool; results come back ordered by r.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from common.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

T = TypeVar('T')


def parse_r_grid(text: str) -> List[float]:
    """
    Expand 'start:stop:step' into the values start, start + step, ...

    stop is included when it lands on the grid.

    Args:
        text: Grid description, step > 0 and start <= stop

    Returns:
        List of r values in increasing order
    """
    parts = text.split(':')
    if len(parts) != 3:
        raise InvalidArgumentError(f"r-grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise InvalidArgumentError(f"r-grid entries must be numbers, got {text!r}")
    if not step > 0:
        raise InvalidArgumentError(f"r-grid step must be positive, got {step}")
    if stop < start:
        raise InvalidArgumentError(f"r-grid stop {stop} is below start {start}")
    count = int((stop - start) / step + 1e-9)
    return [round(start + k * step, 12) for k in range(count + 1)]


def run_sweep(evaluate: Callable[[float], T], r_values: Sequence[float], jobs: int = 1) -> List[T]:
    """
    Evaluate one callable at every r with at most `jobs` workers.

    Args:
        evaluate: Function of r
        r_values: Points to evaluate
        jobs: Worker bound, >= 1

    Returns:
        Results ordered by r regardless of completion order; the first failure
        in r order is re-raised
    """
    if jobs < 1:
        raise InvalidArgumentError(f"jobs must be positive, got {jobs}")
    order = sorted(range(len(r_values)), key=lambda i: r_values[i])
    ordered = [r_values[i] for i in order]
    if jobs == 1 or len(ordered) <= 1:
        results = []
        for i, r in enumerate(ordered):
            results.append(evaluate(r))
            logger.info(f"Sweep point {i + 1}/{len(ordered)} done (r={r:g})")
        return results

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = [executor.submit(evaluate, r) for r in ordered]
        results = []
        for i, (r, future) in enumerate(zip(ordered, futures)):
            results.append(future.result())
            logger.info(f"Sweep point {i + 1}/{len(ordered)} done (r={r:g})")
    return results
