"""Reservation coordinator for one intersection.

Vehicles are admitted one at a time in arrival order. Each admission runs
Passes 2 to 4 against the union of the danger sets of every active reservation
admitted before it, so earlier reservations are never touched. Limits queries
read immutable corridors and may run concurrently with admissions.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .corridor import EntryExitSpec, Pass1Table, PassResult, lattice, pass1_offline, route_sets, run_passes
from .dynamics import VehicleModel
from .errors import HorizonExceeded, UnknownReservation
from .grid import STORE_DTYPE, StateGrid, TimeStateSet, save_tss
from .layout import IntersectionLayout
from .limits import HalfSpaceLimit, driving_limits
from .reach import CFL

FOOTPRINT_RADIUS = 0.15
SCHEDULING_HORIZON = 15.0


@dataclass(frozen=True)
class SolverConfig:
    horizon: float = 12.0
    dt: float = 0.1
    cfl: float = CFL
    backend: str = "auto"
    forward_margin: float | None = None  # Pass-3 outer margin; None means one finest cell


@dataclass(eq=False)
class DangerSet:
    """Inflated position shadow of one corridor, stored per slice on the (x, y) plane."""

    source: str
    grid: StateGrid
    t0: float
    dt: float
    xy: np.ndarray  # (slices, nx, ny); <= 0 within the footprint radius of the corridor

    @property
    def tss(self) -> TimeStateSet:
        return lift_xy(self.xy, self.grid, self.t0, self.dt)


def lift_xy(xy: np.ndarray, grid: StateGrid, t0: float, dt: float) -> TimeStateSet:
    """Broadcast per-slice (x, y) values over heading and speed without copying."""
    vals = np.broadcast_to(xy[:, :, :, None, None], (xy.shape[0],) + grid.shape)
    return TimeStateSet(grid, t0, dt, vals)


def inflate_xy(occupied: np.ndarray, spacing, radius: float) -> np.ndarray:
    """Signed distance to an occupied (x, y) node set, minus ``radius``.

    Uses exact Euclidean distance transforms on the node lattice, so a node is
    inside the result iff it lies within ``radius`` of some occupied node.
    """
    spacing = tuple(float(s) for s in spacing)
    far = float(math.hypot(*(s * (n - 1) for s, n in zip(spacing, occupied.shape)))) + 1.0
    if not occupied.any():
        # nothing to inflate, whatever the radius
        return np.full(occupied.shape, far)
    if occupied.all():
        return np.full(occupied.shape, -far - radius)
    outside = ndimage.distance_transform_edt(~occupied, sampling=spacing)
    inside = ndimage.distance_transform_edt(occupied, sampling=spacing)
    return outside - inside - radius


def build_danger_set(source_id: str, corridor: TimeStateSet, footprint_radius: float = FOOTPRINT_RADIUS) -> DangerSet:
    """Project the corridor onto (x, y) per slice and inflate it by the footprint radius."""
    shadow = corridor.values.min(axis=(3, 4)) <= 0.0
    xy = np.stack([inflate_xy(s, corridor.grid.spacing[:2], footprint_radius) for s in shadow])
    return DangerSet(source_id, corridor.grid, corridor.t0, corridor.dt, xy.astype(STORE_DTYPE))


@dataclass(eq=False)
class CorridorReservation:
    reservation_id: str
    vehicle_id: str
    rank: int
    route: tuple[str, str]
    entry_window: tuple[float, float]
    exit_window: tuple[float, float]
    delta: float
    corridor: TimeStateSet
    status: str = "active"
    timings: dict[str, float] = field(default_factory=dict)
    passes: PassResult | None = field(default=None, repr=False)
    danger: DangerSet | None = field(default=None, repr=False)


class IntersectionManager:
    """First-come-first-served corridor reservations plus the limits service."""

    def __init__(
        self,
        grid: StateGrid | None = None,
        model: VehicleModel | None = None,
        layout: IntersectionLayout | None = None,
        solver: SolverConfig = SolverConfig(),
        table: Pass1Table | None = None,
        footprint_radius: float = FOOTPRINT_RADIUS,
        scheduling_horizon: float = SCHEDULING_HORIZON,
        keep_passes: bool = True,
        archive_dir: str | Path | None = None,
    ):
        self.grid = grid or StateGrid.vehicle()
        self.model = model or VehicleModel()
        self.layout = layout or IntersectionLayout()
        self.solver = solver
        self.table = table or Pass1Table()
        self.footprint_radius = float(footprint_radius)
        self.scheduling_horizon = float(scheduling_horizon)
        self.keep_passes = keep_passes
        self.archive_dir = None if archive_dir is None else Path(archive_dir)
        self.n_slices = lattice(solver.horizon, solver.dt)
        self._admit = threading.Lock()
        self._store: dict[str, CorridorReservation] = {}
        self._next_rank = 1

    # --- pass 1 -------------------------------------------------------------------

    def _route_sets(self, entry: str, exit: str):
        return route_sets(self.layout, self.grid, self.model, entry, exit, self.solver.horizon, self.solver.dt)

    def pass1(self, entry: str, exit: str) -> TimeStateSet:
        self.layout.check_route(entry, exit)
        goal, cons = self._route_sets(entry, exit)
        key = Pass1Table.key(entry, exit, self.grid, self.model, self.layout, self.solver.horizon, self.solver.dt)
        return pass1_offline(self.model, goal, cons, self.table, key, self.solver.backend, self.solver.cfl)

    # --- admissions ---------------------------------------------------------------

    def snapshot(self) -> dict[str, CorridorReservation]:
        return self._store

    def active(self) -> list[CorridorReservation]:
        return sorted((r for r in self._store.values() if r.status == "active"), key=lambda r: r.rank)

    def danger_union(self) -> TimeStateSet | None:
        xy = None
        for r in self.active():
            d = r.danger.xy
            xy = d if xy is None else np.minimum(xy, d)
        if xy is None:
            return None
        return lift_xy(xy, self.grid, 0.0, self.solver.dt)

    def reserve(
        self, vehicle_id: str, entry: str, entry_window, exit: str, delta: float
    ) -> CorridorReservation:
        """Admit a vehicle or raise a typed rejection (EntryInfeasible, ExitInfeasible, ...)."""
        self.layout.check_route(entry, exit)
        ta, tb = (float(t) for t in entry_window)
        if tb > self.scheduling_horizon or tb > self.solver.horizon or ta < 0.0:
            raise HorizonExceeded(
                f"entry window [{ta}, {tb}] outside the scheduling horizon "
                f"[0, {min(self.scheduling_horizon, self.solver.horizon)}]"
            )
        with self._admit:
            phi1 = self.pass1(entry, exit)
            goal, cons = self._route_sets(entry, exit)
            spec = EntryExitSpec(
                self.layout.entry_region(self.grid, entry),
                (ta, tb),
                self.layout.exit_region(self.grid, exit, self.model.speed_limit),
                delta,
            )
            result = run_passes(
                self.model, phi1, goal, cons, spec, self.danger_union(), self.solver.backend, self.solver.cfl,
                self.solver.forward_margin,
            )
            rank = self._next_rank
            rid = f"res-{rank:04d}"
            res = CorridorReservation(
                reservation_id=rid,
                vehicle_id=str(vehicle_id),
                rank=rank,
                route=(entry, exit),
                entry_window=(ta, tb),
                exit_window=result.exit_window,
                delta=float(delta),
                corridor=result.phi4,
                timings=dict(result.timings),
                passes=result if self.keep_passes else None,
                danger=build_danger_set(rid, result.phi4, self.footprint_radius),
            )
            store = dict(self._store)
            store[rid] = res
            self._store = store
            self._next_rank += 1
            return res

    def get(self, reservation_id: str) -> CorridorReservation:
        try:
            return self._store[reservation_id]
        except KeyError:
            raise UnknownReservation(reservation_id) from None

    def release(self, reservation_id: str) -> None:
        """Drop a reservation from the danger union; releasing twice is a no-op."""
        with self._admit:
            res = self.get(reservation_id)
            if res.status == "released":
                return
            if self.archive_dir is not None:
                self.archive_dir.mkdir(parents=True, exist_ok=True)
                save_tss(self.archive_dir / f"{reservation_id}.tss", res.corridor)
            store = dict(self._store)
            store[reservation_id] = replace(res, status="released")
            self._store = store

    # --- limits -------------------------------------------------------------------

    def query_limits(
        self, reservation_id: str, z, steer: float, t: float, delta_t: float | None = None
    ) -> HalfSpaceLimit:
        res = self.get(reservation_id)
        if res.status != "active":
            raise UnknownReservation(f"{reservation_id} is {res.status}")
        return driving_limits(res.corridor, self.model, z, steer, t, delta_t)
