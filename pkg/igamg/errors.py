from typing import Optional

import numpy as np


class IgamgError(Exception):
    pass


class ArgumentError(IgamgError, ValueError):
    pass


class DomainError(ArgumentError):
    """parameter outside the knot range"""


class UsageError(ArgumentError):
    pass


class UnsupportedError(IgamgError):
    pass


class GeometryError(IgamgError):
    pass


class NotSPDError(IgamgError):
    pass


class SingularError(IgamgError):
    pass


class SmootherError(IgamgError):
    pass


class OracleSizeError(IgamgError):
    pass


class ExtrapolationError(IgamgError):
    """Raised when a window cannot be extrapolated.

    The caller falls back to `fallback`, a plain iterate of the window.
    """

    fallback: Optional[np.ndarray]

    def __init__(self, message: str, fallback: Optional[np.ndarray] = None):
        super().__init__(message)
        self.fallback = fallback


class DegenerateWindowError(ExtrapolationError):
    pass


class StagnationError(ExtrapolationError):
    pass
