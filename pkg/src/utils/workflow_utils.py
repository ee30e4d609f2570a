import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


# Fans a per-seed task out over worker processes; results come back in seed order.
# The task must pickle: a module-level function, or a functools.partial of one.
def fan_out_seeds(task: Callable[[int], T], n_seeds: int, workers: int = 1) -> List[T]:
    logger.debug(f"Fan-out: {n_seeds} seeds on {workers} workers")
    if workers <= 1 or n_seeds <= 1:
        return [task(trial) for trial in range(n_seeds)]
    with ProcessPoolExecutor(max_workers=min(workers, n_seeds)) as pool:
        return list(pool.map(task, range(n_seeds)))


# Seed-mean and standard error with compensated summation, independent of order
def aggregate_mean_se(values: Sequence[float]) -> Tuple[float, float]:
    n = len(values)
    if n == 0:
        raise ValueError("cannot aggregate an empty sequence")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)
