"""Reduced rank (RRE) and minimal polynomial (MPE) extrapolation.

Both methods write the extrapolated vector as t = sum_j gamma_j s_{k+j} with
sum_j gamma_j = 1 and obtain gamma from a thin QR factorization of the first
differences [Delta s_k, ..., Delta s_{k+q}].
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
import scipy.linalg

from igamg.config import Accelerator
from igamg.errors import (
    ArgumentError,
    DegenerateWindowError,
    ExtrapolationError,
    StagnationError,
)
from igamg.linalg import ThinQR, solve_upper_triangular, thin_qr
from igamg.types import ExtrapolationResult, SequenceWindow

logger = logging.getLogger(__name__)

STAGNATION_TOL = 1e-10


def _null_vector(r: np.ndarray, order: int) -> np.ndarray:
    """d with d_order = 1 and R[:order, :order+1] d = 0"""
    head = solve_upper_triangular(r[:order, :order], -r[:order, order])
    return np.append(head, 1.0)


def _combine(
    window: SequenceWindow, qr: ThinQR, d: np.ndarray, method: str
) -> ExtrapolationResult:
    order = len(d) - 1
    lam = float(np.sum(d))
    if abs(lam) <= STAGNATION_TOL * float(np.sum(np.abs(d))):
        raise StagnationError(
            "{} weights sum to {:.3e}".format(method, lam), fallback=window.last.copy()
        )
    gamma = d / lam
    alpha = 1.0 - np.cumsum(gamma)[:order]
    t = window.first + qr.q[:, :order] @ (qr.r[:order, :order] @ alpha)
    residual_norm = float(np.linalg.norm(qr.r[: order + 1, : order + 1] @ gamma))
    return ExtrapolationResult(t, gamma, residual_norm, qr.rank)


def _factorize(window: SequenceWindow) -> ThinQR:
    window.validate()
    qr = thin_qr(window.differences())
    if qr.rank == 0:
        raise DegenerateWindowError("all differences vanish", fallback=window.first.copy())
    return qr


def rre(window: SequenceWindow) -> ExtrapolationResult:
    qr = _factorize(window)
    q = window.q
    if qr.rank == q + 1:
        # R^T R d = (1, ..., 1)
        ones = np.ones(q + 1)
        y = scipy.linalg.solve_triangular(qr.r, ones, trans="T", lower=False)
        d = solve_upper_triangular(qr.r, y)
    else:
        logger.debug("RRE window truncated from q={} to q={}".format(q, qr.rank))
        d = _null_vector(qr.r, qr.rank)
    return _combine(window, qr, d, "RRE")


def mpe(window: SequenceWindow) -> ExtrapolationResult:
    qr = _factorize(window)
    order = min(qr.rank, window.q)
    if order < window.q:
        logger.debug("MPE window truncated from q={} to q={}".format(window.q, order))
    return _combine(window, qr, _null_vector(qr.r, order), "MPE")


def rre_closed_form(window: SequenceWindow) -> np.ndarray:
    """t = s_k - DeltaS (Delta^2 S)^+ Delta s_k"""
    window.validate()
    diffs = window.differences()
    coef, *_ = np.linalg.lstsq(window.second_differences(), diffs[:, 0], rcond=None)
    return window.first - diffs[:, : window.q] @ coef


def generalized_residual(window: SequenceWindow, result: ExtrapolationResult) -> np.ndarray:
    """sum_j gamma_j Delta s_{k+j}"""
    n_terms = len(result.gamma)
    if n_terms > window.q + 1 or result.t.shape != (window.dim,):
        raise ArgumentError("{} does not belong to {}".format(result, window))
    return window.differences()[:, :n_terms] @ result.gamma


_METHODS = {"rre": rre, "mpe": mpe}


def extrapolate(window: SequenceWindow, method: str) -> ExtrapolationResult:
    if method not in _METHODS:
        raise ArgumentError("unknown extrapolation method {}".format(method))
    return _METHODS[method](window)


@dataclass
class RestartedResult:
    solution: np.ndarray
    converged: bool
    cycles: int
    history: List[float]
    extrapolations: int = 0
    generalized_residuals: List[float] = field(default_factory=list)
    q_used: List[int] = field(default_factory=list)


def restarted_solve(
    step: Callable[[np.ndarray], np.ndarray],
    s0: np.ndarray,
    q: int,
    method: Union[str, Accelerator],
    tol: float,
    max_cycles: int,
    convergence_test: Callable[[np.ndarray], float],
    observer: Optional[Callable[[np.ndarray], None]] = None,
) -> RestartedResult:
    """Restarted extrapolation.

    Every cycle applies `step` q+1 times to the current vector, extrapolates
    the resulting window and restarts from the extrapolated vector. `history`
    receives the metric of the initial vector, of every inner iterate, and, in
    place of the last inner iterate, of the extrapolated vector. A run that
    meets `tol` at an inner iterate returns it. `observer` sees every vector
    whose metric enters the history.
    """
    method_name = getattr(method, "value", method)
    if method_name not in _METHODS:
        raise ArgumentError("unknown extrapolation method {}".format(method))
    if q < 1:
        raise ArgumentError("q must be >= 1, got {}".format(q))
    if not tol > 0.0:
        raise ArgumentError("tol must be positive, got {}".format(tol))

    s = np.asarray(s0, dtype=float).copy()
    result = RestartedResult(s, False, 0, [])
    best_metric = np.inf

    def record(vec: np.ndarray) -> bool:
        nonlocal best_metric
        metric = float(convergence_test(vec))
        if not np.isfinite(metric):
            logger.warning("non finite convergence metric after {} cycles".format(result.cycles))
            return False
        result.history.append(metric)
        if observer is not None:
            observer(vec)
        if metric < best_metric:
            best_metric = metric
            result.solution = vec
        return True

    if not record(s):
        return result
    if result.history[-1] < tol:
        result.converged = True
        return result

    for cycle in range(1, max_cycles + 1):
        result.cycles = cycle
        window = SequenceWindow([s])
        for j in range(q + 1):
            window.append(step(window.last))
            if j == q:
                break
            if not record(window.last):
                return result
            if result.history[-1] < tol:
                result.solution = window.last
                result.converged = True
                return result

        if not np.all(np.isfinite(window.last)):
            logger.warning("non finite iterate in cycle {}".format(cycle))
            return result
        try:
            extrapolated = extrapolate(window, method_name)
            t = extrapolated.t
            result.extrapolations += 1
            result.generalized_residuals.append(extrapolated.generalized_residual_norm)
            result.q_used.append(extrapolated.q_used)
        except ExtrapolationError as e:
            logger.warning("cycle {}: {}; continuing from the last iterate".format(cycle, e))
            t = window.last

        if not record(t):
            return result
        logger.debug("cycle {}: metric {:.3e}".format(cycle, result.history[-1]))
        if result.history[-1] < tol:
            result.solution = t
            result.converged = True
            return result
        s = t

    logger.warning(
        "restarted {} did not reach tol {:.1e} in {} cycles".format(
            method_name.upper(), tol, max_cycles
        )
    )
    return result
