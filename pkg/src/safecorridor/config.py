"""Scenario configuration, loaded from JSON.

Every block has defaults, so a config only needs its vehicle list. Unknown
keys are rejected to catch typos early.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .corridor import lattice
from .dynamics import VehicleModel
from .errors import ConfigError
from .grid import StateGrid
from .layout import ARMS, IntersectionLayout
from .manager import FOOTPRINT_RADIUS, SCHEDULING_HORIZON, SolverConfig
from .reach import CFL


@dataclass(frozen=True)
class GridConfig:
    bounds_x: tuple[float, float] = (-1.5, 1.5)
    bounds_y: tuple[float, float] = (-1.5, 1.5)
    bounds_v: tuple[float, float] = (0.0, 0.8)
    shape: tuple[int, int, int, int] = (31, 31, 25, 7)

    def build(self) -> StateGrid:
        return StateGrid.vehicle(self.bounds_x, self.bounds_y, (-math.pi, math.pi), self.bounds_v, self.shape)


@dataclass(frozen=True)
class ModelConfig:
    wheel_base: float = 0.32
    steer_max: float = math.pi / 5
    accel_max: float = 0.5
    speed_limit: float = 0.6

    def build(self) -> VehicleModel:
        return VehicleModel(
            self.wheel_base, (-self.steer_max, self.steer_max), (-self.accel_max, self.accel_max), self.speed_limit
        )


@dataclass(frozen=True)
class ControllerConfig:
    """Nominal controller: P speed tracking plus pure-pursuit steering."""

    cruise_speed: float = 0.4
    kp: float = 1.0
    lookahead: float = 0.35


@dataclass(frozen=True)
class VehicleConfig:
    id: str
    entry: str
    exit: str
    entry_window: tuple[float, float]
    delta: float = 2.0
    controller: ControllerConfig = ControllerConfig()


@dataclass(frozen=True)
class ExportConfig:
    xy_times: tuple[float, ...] = ()
    xt_at_y: float | None = None
    passes: tuple[str, ...] = ("phi4",)  # which pass results get slice exports


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    vehicles: tuple[VehicleConfig, ...]
    grid: GridConfig = GridConfig()
    model: ModelConfig = ModelConfig()
    layout: IntersectionLayout = IntersectionLayout()
    solver: SolverConfig = SolverConfig()
    footprint_radius: float = FOOTPRINT_RADIUS
    scheduling_horizon: float = SCHEDULING_HORIZON
    seed: int = 0
    rollout: bool = True
    export: ExportConfig = ExportConfig()
    description: str = ""

    def __post_init__(self):
        if not self.vehicles:
            raise ConfigError("a scenario needs at least one vehicle")
        try:
            lattice(self.solver.horizon, self.solver.dt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 < self.solver.cfl <= 1:
            raise ConfigError("cfl must lie in (0, 1]")
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ConfigError("vehicle ids must be unique")
        for v in self.vehicles:
            for loc in (v.entry, v.exit):
                if loc not in ARMS:
                    raise ConfigError(f"vehicle {v.id}: unknown location {loc!r}")
            ta, tb = v.entry_window
            if not 0 <= ta < tb <= self.solver.horizon:
                raise ConfigError(f"vehicle {v.id}: entry window {v.entry_window} outside [0, {self.solver.horizon}]")
            if not 0 < v.delta <= self.solver.horizon:
                raise ConfigError(f"vehicle {v.id}: delta must lie in (0, horizon]")

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    extra = set(raw) - names
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    kw = {}
    for k, v in raw.items():
        kw[k] = tuple(_tuplify(x) for x in v) if isinstance(v, list) else v
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _tuplify(x):
    return tuple(x) if isinstance(x, list) else x


_BLOCKS = {
    "grid": GridConfig,
    "model": ModelConfig,
    "layout": IntersectionLayout,
    "solver": SolverConfig,
    "export": ExportConfig,
}


def from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    vehicles = []
    for i, v in enumerate(raw.pop("vehicles", [])):
        v = dict(v)
        ctrl = _build(ControllerConfig, v.pop("controller", {}), f"vehicles[{i}].controller")
        vehicles.append(_build(VehicleConfig, {**v, "controller": ctrl}, f"vehicles[{i}]"))
    blocks = {k: _build(cls, raw.pop(k), k) for k, cls in _BLOCKS.items() if k in raw}
    return _build(ScenarioConfig, {**raw, **blocks, "vehicles": vehicles}, "scenario")


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw.setdefault("name", path.stem)
    return from_dict(raw)


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package (``perpendicular``, ``scenario1``, ...)."""
    path = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"no bundled scenario {name!r}")
    return path
