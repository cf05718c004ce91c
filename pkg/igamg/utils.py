import functools
import time
from typing import Tuple

import numpy as np


def is_nondecreasing(values) -> bool:
    # https://stackoverflow.com/questions/3755136
    return all(values[i] <= values[i + 1] for i in range(len(values) - 1))


@functools.lru_cache(maxsize=None)
def _leggauss(n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n_points)


def gauss_legendre(n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """nodes and weights on [-1, 1]"""
    assert n_points > 0
    nodes, weights = _leggauss(n_points)
    return nodes.copy(), weights.copy()


class Stopwatch:
    """context manager measuring wall time with perf_counter"""

    elapsed: float

    def __init__(self):
        self.elapsed = 0.0

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        return self

    def __exit__(self, *args) -> None:
        self.elapsed = time.perf_counter() - self._start
