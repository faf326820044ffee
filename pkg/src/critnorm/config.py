"""Run configuration: YAML text validated against a strict schema.

Example::

    grid: {n: 32, L: 6.283185307179586}
    initial: {name: taylor_green, params: {amplitude: 1.0}, seed: 0}
    solver: {nu: 1.0, dt: 0.001, t_end: 0.5}
    snapshot_every: 10
    monitors:
      - {kind: EnergyBalance}
      - {kind: CriterionIntegral, p: 5}
    output_dir: runs/taylor_green

Unknown keys anywhere are rejected. ``L`` is a scalar or three box lengths.
"""

from __future__ import annotations

import inspect
import math
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator

from . import initial_data
from .errors import ConfigurationError, CritnormError
from .monitors import KINDS, MonitorSpec
from .ns_solver import SolverConfig
from .spectral_core import Grid

_STRICT = ConfigDict(extra="forbid")


class GridModel(BaseModel):
    model_config = _STRICT
    n: Union[int, tuple[int, int, int]] = 32
    L: Union[float, tuple[float, float, float]] = 2.0 * math.pi

    def build(self) -> Grid:
        n = (self.n,) * 3 if isinstance(self.n, int) else tuple(self.n)
        L = (float(self.L),) * 3 if isinstance(self.L, (int, float)) else tuple(float(x) for x in self.L)
        return Grid(n, L)


class InitialModel(BaseModel):
    model_config = _STRICT
    name: str
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in initial_data.NAMES:
            raise ValueError(f"unknown initial data {v!r}; available {initial_data.NAMES}")
        return v


class SolverModel(BaseModel):
    model_config = _STRICT
    nu: float = 1.0
    dt: float = 1e-3
    t_end: float = 0.5
    scheme: str = "if-rk4"
    cfl_limit: float = 0.5


class MonitorModel(BaseModel):
    model_config = _STRICT
    kind: str
    e: tuple[float, float, float] = (0.0, 0.0, 1.0)
    p: float = 5.0
    theta: float = 0.125
    p_matrix: Optional[tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]] = None
    gronwall_c: float = 1.0
    refine: int = 1

    @field_validator("kind")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in KINDS:
            raise ValueError(f"unknown monitor kind {v!r}; available {KINDS}")
        return v

    def build(self) -> MonitorSpec:
        kw = self.model_dump()
        if kw["p_matrix"] is None:
            kw.pop("p_matrix")
        return MonitorSpec(**kw)


class RunConfig(BaseModel):
    """Top-level run description."""

    model_config = _STRICT
    grid: GridModel = Field(default_factory=GridModel)
    initial: InitialModel
    solver: SolverModel = Field(default_factory=SolverModel)
    monitors: list[MonitorModel] = Field(default_factory=list)
    snapshot_every: int = 10
    save_snapshots: bool = True
    figures: bool = True
    output_dir: Optional[str] = None

    def build_grid(self) -> Grid:
        return self.grid.build()

    def build_solver(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(nu=s.nu, dt=s.dt, t_end=s.t_end, scheme=s.scheme, snapshot_every=self.snapshot_every, cfl_limit=s.cfl_limit)

    def build_monitors(self) -> list[MonitorSpec]:
        return [m.build() for m in self.monitors]

    def build_initial(self, grid: Grid | None = None):
        grid = grid or self.build_grid()
        return initial_data.from_name(self.initial.name, grid, self.initial.params, seed=self.initial.seed)


_INITIAL_FUNCS = {
    "zero": initial_data.zero,
    "taylor_green": initial_data.taylor_green,
    "shear": initial_data.shear,
    "random_solenoidal": initial_data.random_solenoidal,
    "perturbed_taylor_green": initial_data.perturbed_taylor_green,
}


def _check_initial_params(cfg: RunConfig) -> None:
    sig = inspect.signature(_INITIAL_FUNCS[cfg.initial.name])
    allowed = [p for p in sig.parameters if p not in ("grid", "seed")]
    for key in cfg.initial.params:
        if key not in allowed:
            raise ConfigurationError(f"initial.params: unknown key {key!r} for {cfg.initial.name}; allowed {allowed}")


def validate(cfg: RunConfig) -> RunConfig:
    """Semantic checks that need the domain types; raises :class:`ConfigurationError`."""
    try:
        cfg.build_grid()
        cfg.build_solver()
        cfg.build_monitors()
        _check_initial_params(cfg)
    except ConfigurationError:
        raise
    except (CritnormError, ValueError, TypeError) as exc:
        raise ConfigurationError(str(exc)) from exc
    return cfg


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping at the top level")
    try:
        cfg = RunConfig.model_validate(data)
    except PydanticValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"])
            lines.append(f"{loc}: {err['msg']}")
        raise ConfigurationError("invalid config: " + "; ".join(lines)) from exc
    return validate(cfg)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
