from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import yaml

from igamg.assembly import ProblemId, catalog
from igamg.errors import ArgumentError

TWO_THIRDS = 2.0 / 3.0


def parse_omega(value: Union[str, float]) -> float:
    if isinstance(value, str):
        if value == "two-thirds":
            return TWO_THIRDS
        try:
            return float(value)
        except ValueError:
            raise ArgumentError("omega must be a number or 'two-thirds', got {}".format(value))
    return float(value)


class SmootherKind(Enum):
    jacobi = "jacobi"
    weighted_jacobi = "weighted_jacobi"
    gauss_seidel = "gauss_seidel"

    @classmethod
    def from_name(cls, name: str) -> "SmootherKind":
        aliases = {"wjacobi": "weighted_jacobi", "gs": "gauss_seidel"}
        try:
            return cls(aliases.get(name, name))
        except ValueError:
            raise ArgumentError("unknown smoother {}".format(name))


class CycleKind(Enum):
    two_grid = "two_grid"
    v = "v"
    w = "w"

    @classmethod
    def from_name(cls, name: str) -> "CycleKind":
        try:
            return cls(name.replace("-", "_"))
        except ValueError:
            raise ArgumentError("unknown cycle {}".format(name))

    @property
    def mu(self) -> int:
        return 2 if self == CycleKind.w else 1

    @property
    def label(self) -> str:
        return {"two_grid": "Two-Grid", "v": "V-cycle", "w": "W-cycle"}[self.value]


class Accelerator(Enum):
    none = "none"
    rre = "rre"
    mpe = "mpe"

    @classmethod
    def from_name(cls, name: str) -> "Accelerator":
        try:
            return cls(name)
        except ValueError:
            raise ArgumentError("unknown accelerator {}".format(name))


class OutputFormat(Enum):
    csv = "csv"
    json = "json"


@dataclass(frozen=True)
class SmootherConfig:
    kind: SmootherKind = SmootherKind.weighted_jacobi
    omega: float = TWO_THIRDS
    nu1: int = 1
    nu2: int = 1

    def __post_init__(self):
        if self.kind == SmootherKind.weighted_jacobi and not (0.0 < self.omega <= 1.0):
            raise ArgumentError("omega must be in (0, 1], got {}".format(self.omega))
        if self.nu1 < 0 or self.nu2 < 0:
            raise ArgumentError("negative sweep count ({}, {})".format(self.nu1, self.nu2))
        if self.nu1 + self.nu2 < 1:
            raise ArgumentError("at least one smoothing sweep is required")

    @property
    def weight(self) -> float:
        """damping actually applied by the Jacobi update"""
        return self.omega if self.kind == SmootherKind.weighted_jacobi else 1.0

    @classmethod
    def from_yaml_dict(cls, yaml_dict: Dict) -> "SmootherConfig":
        default = cls()
        return cls(
            SmootherKind.from_name(yaml_dict.get("kind", default.kind.value)),
            parse_omega(yaml_dict.get("omega", default.omega)),
            int(yaml_dict.get("nu1", default.nu1)),
            int(yaml_dict.get("nu2", default.nu2)),
        )


@dataclass(frozen=True, eq=False)
class SolveConfig:
    cycle: CycleKind = CycleKind.v
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    nlevels: Optional[int] = None  # None: chosen from the problem size
    accelerator: Accelerator = Accelerator.none
    q: int = 8
    tol: float = 1e-12
    max_iter: int = 1000
    initial_guess: Optional[np.ndarray] = None  # None: zero vector

    def __post_init__(self):
        if self.accelerator != Accelerator.none and self.q < 1:
            raise ArgumentError("restart number q must be >= 1, got {}".format(self.q))
        if not self.tol > 0.0:
            raise ArgumentError("tol must be positive, got {}".format(self.tol))
        if self.max_iter < 0:
            raise ArgumentError("max_iter must be nonnegative, got {}".format(self.max_iter))
        if self.nlevels is not None:
            if self.nlevels < 2:
                raise ArgumentError("nlevels must be >= 2, got {}".format(self.nlevels))
            if self.cycle == CycleKind.two_grid and self.nlevels != 2:
                raise ArgumentError("two-grid cycle uses exactly 2 levels")

    @property
    def method_label(self) -> str:
        if self.accelerator == Accelerator.none:
            return self.cycle.label
        return "{}(q={})-{}".format(self.accelerator.value.upper(), self.q, self.cycle.label)

    @classmethod
    def from_yaml_dict(cls, yaml_dict: Dict) -> "SolveConfig":
        default = cls()
        nlevels = yaml_dict.get("nlevels", None)
        return cls(
            cycle=CycleKind.from_name(yaml_dict.get("cycle", default.cycle.value)),
            smoother=SmootherConfig.from_yaml_dict(yaml_dict.get("smoother", {})),
            nlevels=None if nlevels is None else int(nlevels),
            accelerator=Accelerator.from_name(
                yaml_dict.get("accelerator", default.accelerator.value)
            ),
            q=int(yaml_dict.get("q", default.q)),
            tol=float(yaml_dict.get("tol", default.tol)),
            max_iter=int(yaml_dict.get("max_iter", default.max_iter)),
        )


@dataclass(frozen=True, eq=False)
class RunSpec:
    problem: ProblemId
    n: int
    degree: int
    solve: SolveConfig = field(default_factory=SolveConfig)
    output_format: OutputFormat = OutputFormat.json
    out: Optional[Path] = None
    history: bool = False

    def __post_init__(self):
        if self.degree < 1:
            raise ArgumentError("degree must be >= 1, got {}".format(self.degree))
        if self.n < 1:
            raise ArgumentError("element count must be >= 1, got {}".format(self.n))

    @property
    def dim(self) -> int:
        return catalog(self.problem).dim

    @classmethod
    def from_yaml_dict(cls, yaml_dict: Dict) -> "RunSpec":
        for key in ("problem", "n", "p"):
            if key not in yaml_dict:
                raise ArgumentError("run config lacks key '{}'".format(key))
        out = yaml_dict.get("out", None)
        try:
            output_format = OutputFormat(yaml_dict.get("format", "json"))
        except ValueError:
            raise ArgumentError("unknown output format {}".format(yaml_dict.get("format")))
        return cls(
            problem=ProblemId.from_name(yaml_dict["problem"]),
            n=int(yaml_dict["n"]),
            degree=int(yaml_dict["p"]),
            solve=SolveConfig.from_yaml_dict(yaml_dict.get("solve", {})),
            output_format=output_format,
            out=None if out is None else Path(out),
            history=bool(yaml_dict.get("history", False)),
        )

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "RunSpec":
        with open(path, "r") as f:
            yaml_dict = yaml.safe_load(f)
        if not isinstance(yaml_dict, dict):
            raise ArgumentError("{} does not hold a mapping".format(path))
        return cls.from_yaml_dict(yaml_dict)
