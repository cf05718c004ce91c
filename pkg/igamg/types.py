from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from igamg.errors import ArgumentError


@dataclass
class SequenceWindow:
    """Iterates s_k, ..., s_{k+q+1} of a fixed point iteration."""

    iterates: List[np.ndarray]

    @classmethod
    def create_empty(cls) -> "SequenceWindow":
        return cls([])

    @classmethod
    def from_iterates(cls, iterates: Sequence[np.ndarray]) -> "SequenceWindow":
        window = cls([np.asarray(s, dtype=float) for s in iterates])
        window.validate()
        return window

    def append(self, iterate: np.ndarray) -> None:
        iterate = np.asarray(iterate, dtype=float)
        if len(self.iterates) > 0 and iterate.shape != self.iterates[0].shape:
            raise ArgumentError(
                "iterate of shape {} in a window of {}".format(iterate.shape, self.iterates[0].shape)
            )
        self.iterates.append(iterate)

    def validate(self) -> None:
        if len(self.iterates) < 3:
            raise ArgumentError("a window needs at least 3 iterates, got {}".format(len(self)))
        shape = self.iterates[0].shape
        if len(shape) != 1:
            raise ArgumentError("iterates must be vectors, got shape {}".format(shape))
        for s in self.iterates:
            if s.shape != shape:
                raise ArgumentError("iterates of shapes {} and {}".format(shape, s.shape))
            if not np.all(np.isfinite(s)):
                raise ArgumentError("non finite iterate in window")

    @property
    def q(self) -> int:
        return len(self.iterates) - 2

    @property
    def dim(self) -> int:
        return self.iterates[0].shape[0]

    @property
    def first(self) -> np.ndarray:
        return self.iterates[0]

    @property
    def last(self) -> np.ndarray:
        return self.iterates[-1]

    def differences(self) -> np.ndarray:
        """columns Delta s_{k+j}, j = 0..q"""
        return np.diff(np.stack(self.iterates, axis=1), axis=1)

    def second_differences(self) -> np.ndarray:
        """columns Delta^2 s_{k+j}, j = 0..q-1"""
        return np.diff(self.differences(), axis=1)

    def translated(self, shift: np.ndarray) -> "SequenceWindow":
        return SequenceWindow([s + shift for s in self.iterates])

    def __len__(self):
        return len(self.iterates)

    def __repr__(self):
        return self.__str__()

    def __str__(self):
        dim = self.iterates[0].shape[0] if len(self.iterates) > 0 else 0
        return "{}, q={}, dim={}".format(self.__class__.__name__, self.q, dim)


@dataclass(frozen=True, eq=False)
class ExtrapolationResult:
    t: np.ndarray
    gamma: np.ndarray
    generalized_residual_norm: float
    rank_used: int

    @property
    def q_used(self) -> int:
        return len(self.gamma) - 1
