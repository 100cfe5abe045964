"""Versioned JSON study configuration."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..inference.fitting import FitConfig
from ..inference.testfunctions import parse_method
from ..kernels import FAMILIES, KernelModel, correlation_from_dict, existence_check, intensity_from_dict
from ..numerics import SeedSpec, Window

SCHEMA_VERSION = 1
JOBS_ENV = "DPPEST_JOBS"
# replicate index inside a SeedSpec is cell * CELL_STRIDE + replicate
CELL_STRIDE = 1_000_000
EXTRAS = ("rho_simultaneous_at_truth", "e_at_truth")


class ConfigError(ValueError):
    pass


@dataclass
class Cell:
    intensity: dict
    alpha: float

    def model(self, family: str, window: Window, check: bool = True) -> KernelModel:
        corr = correlation_from_dict({"family": family, "alpha": self.alpha})
        return KernelModel(intensity_from_dict(self.intensity), corr, window, check)

    @property
    def label(self) -> str:
        if self.intensity.get("type", "homogeneous") == "homogeneous":
            return f"rho={self.intensity['rho']:g},alpha={self.alpha:g}"
        return f"rho=inhom,alpha={self.alpha:g}"


@dataclass
class MethodSpec:
    method: str
    layout: str = "two-step"

    @property
    def label(self) -> str:
        return self.method if self.layout == "two-step" else f"{self.method}/{self.layout}"


@dataclass
class StudyConfig:
    cells: list[Cell]
    methods: list[MethodSpec]
    replicates: int = 200
    master_seed: int = 20240611
    family: str = "bessel"
    window: list[float] = field(default_factory=lambda: [0.0, 1.0, 0.0, 1.0])
    quadrature: dict = field(default_factory=lambda: {"window_order": 24, "radial_order": 16,
                                                       "angular_order": 8, "rect_order": 10})
    n_scan: int = 32
    delta: float = 1e-6
    extras: list[str] = field(default_factory=list)
    name: str = "study"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.cells = [c if isinstance(c, Cell) else Cell(**c) for c in self.cells]
        self.methods = [m if isinstance(m, MethodSpec) else
                        MethodSpec(m) if isinstance(m, str) else MethodSpec(**m) for m in self.methods]
        self.validate()

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.replicates >= CELL_STRIDE:
            raise ConfigError(f"replicates must be < {CELL_STRIDE}")
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if not self.cells:
            raise ConfigError("no cells")
        unknown = set(self.extras) - set(EXTRAS)
        if unknown:
            raise ConfigError(f"unknown extras {sorted(unknown)}")
        win = self.window_obj
        for c in self.cells:
            try:
                m = c.model(self.family, win, check=False)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad cell {c}: {exc}") from exc
            margin = existence_check(m)
            if margin > 1.0:
                raise ConfigError(f"cell {c.label} violates the existence condition (margin {margin:.4f})")
        for m in self.methods:
            try:
                parse_method(m.method)
                self.fit_config(m, self.cells[0])
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad method {m}: {exc}") from exc

    @property
    def window_obj(self) -> Window:
        return Window(*self.window)

    def fit_config(self, method: MethodSpec, cell: Cell) -> FitConfig:
        kind = cell.intensity.get("type", "homogeneous")
        q = self.quadrature
        return FitConfig(
            layout=method.layout,
            family=self.family,
            intensity=kind,
            covariates=tuple(cell.intensity.get("covariates", ("1", "x"))),
            n_scan=self.n_scan,
            delta=self.delta,
            window_order=q.get("window_order", 24),
            radial_order=q.get("radial_order", 16),
            angular_order=q.get("angular_order", 8),
            rect_order=q.get("rect_order", 10),
            compute_H="e_at_truth" in self.extras,
        )

    def seed(self, cell_index: int, replicate: int) -> SeedSpec:
        return SeedSpec(self.master_seed, cell_index * CELL_STRIDE + replicate)

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "StudyConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(d)


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{JOBS_ENV}={raw!r} is not an integer") from exc
