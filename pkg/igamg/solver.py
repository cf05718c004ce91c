import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from igamg.assembly import DiscreteSystem, l2_error, l2_norm, residual_l2
from igamg.config import Accelerator, CycleKind, SolveConfig
from igamg.errors import ArgumentError
from igamg.extrapolation import restarted_solve
from igamg.multigrid import COARSE_DIM_CAP, Hierarchy, build_hierarchy, mu_cycle
from igamg.utils import Stopwatch

logger = logging.getLogger(__name__)

DEFAULT_NLEVELS = 4


@dataclass
class SolveReport:
    method: str
    converged: bool
    cycles: int
    global_iterations: int
    residual_history: List[float]
    error_history: Optional[List[float]]
    final_residual_l2: float
    final_error_l2: Optional[float]
    relative_error_l2: Optional[float]
    wall_time_seconds: float
    setup_seconds: float
    nlevels: int
    extrapolations: int = 0
    generalized_residual_history: List[float] = field(default_factory=list)
    monotone: bool = True
    solution: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        assert all(np.isfinite(self.residual_history))
        assert self.global_iterations == len(self.residual_history) - 1

    def to_dict(self) -> Dict:
        dic = asdict(self)
        dic.pop("solution")
        return dic


def choose_nlevels(dim: int, n_elements: int, degree: int, cap: int = COARSE_DIM_CAP) -> int:
    """Default level count.

    1D starts from 4 levels, 2D from the deepest hierarchy whose coarsest grid
    keeps an element and an interior unknown. The count is reduced while the
    coarsest grid has no element or no interior unknown, and deepened while it
    is too large for the direct solve.
    """

    def coarse_dim(nlevels: int) -> Optional[int]:
        factor = 2 ** (nlevels - 1)
        if n_elements % factor != 0 or n_elements // factor < 1:
            return None
        interior = n_elements // factor + degree - 2
        return interior**dim if interior >= 1 else None

    nlevels = DEFAULT_NLEVELS
    if dim > 1:
        while coarse_dim(nlevels + 1) is not None:
            nlevels += 1
    while nlevels > 2 and coarse_dim(nlevels) is None:
        nlevels -= 1
    if coarse_dim(nlevels) is None:
        raise ArgumentError(
            "no two level hierarchy for {} elements with p={}".format(n_elements, degree)
        )
    while coarse_dim(nlevels) > cap and coarse_dim(nlevels + 1) is not None:  # type: ignore
        nlevels += 1
    if coarse_dim(nlevels) > cap:  # type: ignore
        logger.warning(
            "coarsest grid of {} unknowns exceeds the direct solve cap {}".format(
                coarse_dim(nlevels), cap
            )
        )
    return nlevels


def fixed_point_map(hierarchy: Hierarchy) -> Callable[[np.ndarray], np.ndarray]:
    """s -> one mu-cycle on the finest level applied to s"""

    def step(s: np.ndarray) -> np.ndarray:
        return mu_cycle(hierarchy, hierarchy.finest, hierarchy.rhs, s)

    return step


def _is_monotone(history: List[float]) -> bool:
    tail = history[1:]
    return all(tail[i + 1] < tail[i] for i in range(len(tail) - 1))


def solve(
    system: DiscreteSystem, config: SolveConfig, hierarchy: Optional[Hierarchy] = None
) -> SolveReport:
    if config.cycle == CycleKind.two_grid:
        nlevels = 2
    elif config.nlevels is not None:
        nlevels = config.nlevels
    else:
        nlevels = choose_nlevels(system.dim, system.n_elements[0], system.degree)

    with Stopwatch() as setup_watch:
        if hierarchy is None:
            hierarchy = build_hierarchy(system, nlevels, config.smoother, config.cycle.mu)
    if hierarchy.nlevels != nlevels or hierarchy.mu != config.cycle.mu:
        raise ArgumentError("{} does not match the solve configuration".format(hierarchy))

    if config.initial_guess is None:
        x0 = np.zeros(system.n_unknowns)
    else:
        x0 = np.asarray(config.initial_guess, dtype=float)
        if x0.shape != (system.n_unknowns,):
            raise ArgumentError(
                "initial guess of shape {} for {} unknowns".format(x0.shape, system.n_unknowns)
            )

    step = fixed_point_map(hierarchy)
    errors: Optional[List[float]] = None
    if system.exact_solution is not None:
        errors = []

    def observe(vec: np.ndarray) -> None:
        if errors is not None:
            errors.append(l2_error(system, vec))

    def metric(vec: np.ndarray) -> float:
        return residual_l2(system, vec)

    label = config.method_label
    logger.info("solving {} with {}".format(system, label))
    extrapolations = 0
    generalized: List[float] = []
    with Stopwatch() as watch:
        if config.accelerator == Accelerator.none:
            history = [metric(x0)]
            observe(x0)
            x = x0
            cycles = 0
            while history[-1] >= config.tol and cycles < config.max_iter:
                candidate = step(x)
                value = metric(candidate)
                if not np.isfinite(value):
                    logger.warning("residual is not finite after {} cycles".format(cycles))
                    break
                x = candidate
                cycles += 1
                history.append(value)
                observe(x)
                logger.debug("cycle {}: residual {:.3e}".format(cycles, value))
            solution = x
            converged = history[-1] < config.tol
        else:
            restarted = restarted_solve(
                step,
                x0,
                config.q,
                config.accelerator,
                config.tol,
                config.max_iter,
                metric,
                observe,
            )
            history = restarted.history
            solution = restarted.solution
            cycles = restarted.cycles
            converged = restarted.converged
            extrapolations = restarted.extrapolations
            generalized = restarted.generalized_residuals

    monotone = _is_monotone(history)
    if config.accelerator == Accelerator.none and not monotone:
        logger.warning("residual history of {} is not monotone".format(label))
    if not converged:
        logger.warning(
            "{} stopped after {} cycles at residual {:.3e}".format(label, cycles, history[-1])
        )

    relative = None
    final_error = errors[-1] if errors else None
    if final_error is not None and system.exact_solution is not None:
        norm = l2_norm(system, system.exact_solution)
        relative = final_error / norm if norm > 0.0 else None

    report = SolveReport(
        method=label,
        converged=converged,
        cycles=cycles,
        global_iterations=len(history) - 1,
        residual_history=history,
        error_history=errors,
        final_residual_l2=history[-1],
        final_error_l2=final_error,
        relative_error_l2=relative,
        wall_time_seconds=watch.elapsed,
        setup_seconds=setup_watch.elapsed,
        nlevels=hierarchy.nlevels,
        extrapolations=extrapolations,
        generalized_residual_history=generalized,
        monotone=monotone,
        solution=solution,
    )
    logger.info(
        "{}: converged={} cycles={} global={} residual={:.3e}".format(
            label, converged, cycles, report.global_iterations, report.final_residual_l2
        )
    )
    return report
