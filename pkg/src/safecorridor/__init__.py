"""Safe time-state corridors for autonomous intersection management.

Reachability tubes on a 4-state bicycle model are combined by a temporal
logic tree into per-vehicle corridors; a driving-limits service keeps each
vehicle inside its corridor.
"""

from .config import ScenarioConfig, bundled, load_config
from .corridor import EntryExitSpec, Pass1Table, PassResult, run_passes
from .dynamics import DoubleIntegrator, VehicleModel
from .errors import CorridorError
from .grid import LevelSetField, StateGrid, TimeStateSet, load_tss, save_tss
from .layout import IntersectionLayout
from .limits import HalfSpaceLimit, driving_limits, limits_profile
from .manager import CorridorReservation, IntersectionManager, SolverConfig
from .reach import backward_tube, forward_tube
from .scenario import export_slice, run_scenario

__all__ = [
    "CorridorError",
    "CorridorReservation",
    "DoubleIntegrator",
    "EntryExitSpec",
    "HalfSpaceLimit",
    "IntersectionLayout",
    "IntersectionManager",
    "LevelSetField",
    "Pass1Table",
    "PassResult",
    "ScenarioConfig",
    "SolverConfig",
    "StateGrid",
    "TimeStateSet",
    "VehicleModel",
    "backward_tube",
    "bundled",
    "driving_limits",
    "export_slice",
    "forward_tube",
    "limits_profile",
    "load_config",
    "load_tss",
    "run_passes",
    "run_scenario",
    "save_tss",
]
