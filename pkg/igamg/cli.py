import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from igamg.assembly import ProblemId, catalog, discretize
from igamg.config import (
    Accelerator,
    CycleKind,
    OutputFormat,
    RunSpec,
    SmootherConfig,
    SmootherKind,
    SolveConfig,
    parse_omega,
)
from igamg.errors import ArgumentError, IgamgError, UsageError
from igamg.solver import SolveReport, solve

logger = logging.getLogger(__name__)

CSV_HEADER = ["grid", "p", "method", "iter", "global_iter", "res_l2", "err_l2", "seconds"]
HISTORY_HEADER = ["global_iteration", "residual_l2", "error_l2"]
TABLES_PATH = Path(__file__).parent / "data" / "tables.yaml"

PROBLEM_FLAGS = {
    "poisson1d": ProblemId.poisson1d,
    "poisson2d": ProblemId.poisson2d,
    "full-elliptic": ProblemId.full_elliptic_square,
    "advection-diffusion": ProblemId.advection_diffusion,
    "annulus": ProblemId.full_elliptic_annulus,
}


def format_real(value: Optional[float]) -> str:
    return "" if value is None else "%.6e" % value


def format_grid(n_elements: int, dim: int) -> str:
    return "x".join([str(n_elements)] * dim)


@dataclass(frozen=True)
class TableCell:
    problem: ProblemId
    n: int
    degree: int
    solve: SolveConfig
    published_key: str  # method label without the restart number

    @property
    def grid(self) -> str:
        return format_grid(self.n, catalog(self.problem).dim)


@lru_cache(maxsize=None)
def load_tables() -> Dict:
    with open(TABLES_PATH, "r") as f:
        return yaml.safe_load(f)


def table_names() -> List[str]:
    return list(load_tables().keys())


def table_cells(name: str, max_iter: Optional[int] = None) -> List[TableCell]:
    tables = load_tables()
    if name not in tables:
        raise UsageError("unknown table {}; choose from {}".format(name, ", ".join(tables)))
    table = tables[name]
    problem = ProblemId.from_name(table["problem"])
    limit = max_iter if max_iter is not None else table.get("max_iter", 1000)
    cells = []
    for n in table["grids"]:
        for degree in table["degrees"]:
            for method in table["methods"]:
                accelerator = Accelerator.from_name(method["accelerator"])
                q = int(method.get("q_by_degree", {}).get(degree, method.get("q", 8)))
                config = SolveConfig(
                    cycle=CycleKind.from_name(method["cycle"]),
                    nlevels=table.get("nlevels", None),
                    accelerator=accelerator,
                    q=q,
                    max_iter=int(limit),
                )
                key = config.cycle.label
                if accelerator != Accelerator.none:
                    key = "{}-{}".format(accelerator.value.upper(), key)
                cells.append(TableCell(problem, int(n), int(degree), config, key))
    return cells


def published_value(name: str, cell: TableCell, quantity: str = "iter") -> Optional[float]:
    table = load_tables()[name].get("published", {}).get(quantity, {})
    return table.get(cell.published_key, {}).get(cell.n, {}).get(cell.degree, None)


def report_row(report: SolveReport, n_elements: int, dim: int, degree: int) -> List[str]:
    return [
        format_grid(n_elements, dim),
        str(degree),
        report.method,
        str(report.cycles),
        str(report.global_iterations),
        format_real(report.final_residual_l2),
        format_real(report.final_error_l2),
        format_real(report.wall_time_seconds),
    ]


def failed_row(cell: TableCell) -> List[str]:
    return [cell.grid, str(cell.degree), cell.solve.method_label, "-1", "-1", "", "", ""]


def write_csv(rows: Sequence[Sequence[str]], header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def run_single(spec: RunSpec) -> SolveReport:
    system = discretize(spec.problem, spec.n, spec.degree)
    return solve(system, spec.solve)


def format_report(report: SolveReport, spec: RunSpec) -> str:
    if spec.output_format == OutputFormat.csv:
        return write_csv([report_row(report, spec.n, spec.dim, spec.degree)], CSV_HEADER)
    dic = report.to_dict()
    dic.update(problem=spec.problem.value, n=spec.n, p=spec.degree)
    return json.dumps(dic, indent=2) + "\n"


def _run_cell(cell: TableCell) -> Tuple[TableCell, Optional[SolveReport], Optional[str]]:
    try:
        system = discretize(cell.problem, cell.n, cell.degree)
        report = solve(system, cell.solve)
        report.solution = None
        return cell, report, None
    except IgamgError as e:
        return cell, None, "{}: {}".format(type(e).__name__, e)


def run_table(name: str, jobs: int = 1, max_iter: Optional[int] = None) -> str:
    cells = table_cells(name, max_iter)
    logger.info("running table {} with {} cells".format(name, len(cells)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_run_cell, cells))
    else:
        results = [_run_cell(cell) for cell in cells]

    rows = []
    for cell, report, error in results:
        if report is None:
            logger.warning(
                "cell grid={} p={} {} failed: {}".format(
                    cell.grid, cell.degree, cell.solve.method_label, error
                )
            )
            rows.append(failed_row(cell))
            continue
        if not report.converged:
            logger.warning(
                "cell grid={} p={} {} did not converge".format(cell.grid, cell.degree, report.method)
            )
        rows.append(report_row(report, cell.n, catalog(cell.problem).dim, cell.degree))
    return write_csv(rows, CSV_HEADER)


def boundary_drop(history: Sequence[float], q: int) -> bool:
    """Whether every completed restart cycle drops the residual more at its
    extrapolation than at any of its inner steps."""
    period = q + 1
    n_cycles = (len(history) - 1) // period
    if n_cycles == 0:
        return False
    for cycle in range(n_cycles):
        start = cycle * period
        ratios = [history[i + 1] / history[i] for i in range(start, start + period)]
        if ratios[-1] >= min(ratios[:-1]):
            return False
    return True


def emit_history(spec: RunSpec) -> Tuple[str, Dict]:
    """Per-iteration residual and error of one run as CSV text plus metadata."""
    system = discretize(spec.problem, spec.n, spec.degree)
    report = solve(system, spec.solve)
    errors = report.error_history
    rows = []
    for index, residual in enumerate(report.residual_history):
        error = None if errors is None else errors[index]
        rows.append([str(index), format_real(residual), format_real(error)])
    metadata = {
        "converged": report.converged,
        "method": report.method,
        "boundary_drop": report.extrapolations > 0
        and boundary_drop(report.residual_history, spec.solve.q),
    }
    return write_csv(rows, HISTORY_HEADER), metadata


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="igamg-bench",
        description="multigrid and extrapolated multigrid solves of spline Galerkin systems",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--config", type=str, help="yaml run config, flags override it")
    parser.add_argument("--problem", choices=list(PROBLEM_FLAGS.keys()))
    parser.add_argument("--n", type=int, help="elements per direction")
    parser.add_argument("--p", type=int, help="spline degree")
    parser.add_argument("--cycle", choices=["two-grid", "v", "w"])
    parser.add_argument("--smoother", choices=["jacobi", "wjacobi", "gs"])
    parser.add_argument("--omega", type=str, help="number or 'two-thirds'")
    parser.add_argument("--nu1", type=int)
    parser.add_argument("--nu2", type=int)
    parser.add_argument("--nlevels", type=int)
    parser.add_argument("--accelerator", choices=["none", "rre", "mpe"])
    parser.add_argument("--q", type=int, help="restart number")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--max-iter", type=int, help="cap on cycles")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--out", type=str, help="output path, stdout if omitted")
    parser.add_argument("--table", type=str, help="run a benchmark table")
    parser.add_argument("--history", action="store_true", help="emit per-iteration history")
    parser.add_argument("--jobs", type=int, default=1, help="parallel table cells")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true")
    verbosity.add_argument("--quiet", "-q", action="store_true")
    return parser


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    """Merge a yaml run config (if any) with the explicit flags."""
    base: Optional[RunSpec] = None
    if args.config is not None:
        base = RunSpec.from_yaml(args.config)

    problem = PROBLEM_FLAGS[args.problem] if args.problem is not None else None
    if problem is None and base is None:
        raise UsageError("--problem is required without --config")
    if args.n is None and base is None:
        raise UsageError("--n is required without --config")
    if args.p is None and base is None:
        raise UsageError("--p is required without --config")
    if args.p is not None and args.p < 1:
        raise UsageError("--p must be >= 1, got {}".format(args.p))
    if args.n is not None and args.n < 1:
        raise UsageError("--n must be >= 1, got {}".format(args.n))

    solve_base = base.solve if base is not None else SolveConfig()
    smoother_base = solve_base.smoother
    try:
        smoother = SmootherConfig(
            kind=SmootherKind.from_name(args.smoother) if args.smoother else smoother_base.kind,
            omega=parse_omega(args.omega) if args.omega is not None else smoother_base.omega,
            nu1=args.nu1 if args.nu1 is not None else smoother_base.nu1,
            nu2=args.nu2 if args.nu2 is not None else smoother_base.nu2,
        )
        cycle = CycleKind.from_name(args.cycle) if args.cycle else solve_base.cycle
        nlevels = args.nlevels if args.nlevels is not None else solve_base.nlevels
        if cycle == CycleKind.two_grid and args.nlevels is None:
            nlevels = 2
        solve_config = replace(
            solve_base,
            cycle=cycle,
            smoother=smoother,
            nlevels=nlevels,
            accelerator=Accelerator.from_name(args.accelerator)
            if args.accelerator
            else solve_base.accelerator,
            q=args.q if args.q is not None else solve_base.q,
            tol=args.tol if args.tol is not None else solve_base.tol,
            max_iter=args.max_iter if args.max_iter is not None else solve_base.max_iter,
        )
        spec = RunSpec(
            problem=problem if problem is not None else base.problem,  # type: ignore
            n=args.n if args.n is not None else base.n,  # type: ignore
            degree=args.p if args.p is not None else base.degree,  # type: ignore
            solve=solve_config,
            output_format=OutputFormat(args.format)
            if args.format
            else (base.output_format if base else OutputFormat.json),
            out=Path(args.out) if args.out else (base.out if base else None),
            history=args.history or (base.history if base else False),
        )
    except ArgumentError as e:
        raise UsageError(str(e))

    if spec.solve.nlevels is not None and spec.n % 2 ** (spec.solve.nlevels - 1) != 0:
        raise UsageError("--n {} cannot be halved {} times".format(spec.n, spec.solve.nlevels))
    return spec


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", newline="\n", encoding="utf-8") as f:
        f.write(text)


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write("igamg-bench: error: {}\n".format(e))
        return 1
    _configure_logging(args)

    try:
        if args.table is not None:
            if args.jobs < 1:
                raise UsageError("--jobs must be >= 1")
            text = run_table(args.table, jobs=args.jobs, max_iter=args.max_iter)
            _write(text, Path(args.out) if args.out else None)
            return 0

        spec = spec_from_args(args)
        if spec.history:
            text, metadata = emit_history(spec)
            logger.info("history metadata: {}".format(metadata))
            _write(text, spec.out)
            return 0 if metadata["converged"] else 2

        report = run_single(spec)
        _write(format_report(report, spec), spec.out)
        return 0 if report.converged else 2
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write("igamg-bench: error: {}\n".format(e))
        return 1
    except IgamgError as e:
        logger.error("{}: {}".format(type(e).__name__, e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
