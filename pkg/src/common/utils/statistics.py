"""Summary statistics over score and length samples."""

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel


class Statistics(BaseModel):
    mean: float
    median: float
    std: float
    min: float
    max: float
    count: int


def statistics(values: Sequence[float]) -> Statistics:
    """Compute basic statistics from a list of values.

    Args:
        values (Sequence[float]): The values to summarise. An empty sequence yields all zeros.

    Returns:
        Statistics: The computed statistics.
    """
    if len(values) == 0:
        return Statistics(mean=0.0, median=0.0, std=0.0, min=0.0, max=0.0, count=0)

    arr = np.asarray(values, dtype=np.float64)
    return Statistics(
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        std=float(arr.std()),
        min=float(arr.min()),
        max=float(arr.max()),
        count=int(arr.size),
    )
