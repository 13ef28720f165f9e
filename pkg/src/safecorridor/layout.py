"""Geometry of a 4-way intersection with two-lane roads and right-hand traffic.

Every arm ("left", "right", "bottom", "top") carries an inbound lane that
drives toward the centre and an outbound lane that drives away from it. A
route is the union of its inbound lane, the central box and its outbound
lane; inside the lanes the heading must stay near the lane direction, inside
the box any heading is allowed. The layout is a reconstruction: the real lane
geometry is only known pictorially.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import UnknownRoute
from .grid import STORE_DTYPE, LevelSetField, StateGrid, wrap_angle

ARMS = ("left", "right", "bottom", "top")
_OUTWARD = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "bottom": (0.0, -1.0), "top": (0.0, 1.0)}
# keeps the top of the speed range strictly outside the constraint
SPEED_EPS = 1e-4


def _heading(d) -> float:
    return math.atan2(d[1], d[0])


@dataclass(frozen=True)
class Lane:
    arm: str
    inbound: bool

    @property
    def direction(self) -> tuple[float, float]:
        n = _OUTWARD[self.arm]
        return (-n[0], -n[1]) if self.inbound else n

    @property
    def heading(self) -> float:
        return _heading(self.direction)

    @property
    def right_normal(self) -> tuple[float, float]:
        d = self.direction
        return (d[1], -d[0])


@dataclass(frozen=True)
class IntersectionLayout:
    """Lane and region dimensions, all in meters / radians / m/s."""

    half_width: float = 0.6  # road half-width; each lane is this wide
    box_half_width: float = 0.9  # the central area flares wider than the roads (corner returns)
    lane_margin: float = 0.05  # keep the reference point this far from lane edges
    heading_tol: float = math.pi / 4
    entry_depth: tuple[float, float] = (1.05, 1.35)  # distance from centre along the arm
    entry_lateral: tuple[float, float] = (0.15, 0.45)  # offset from the road centreline
    entry_heading_tol: float = 0.2
    entry_speed: tuple[float, float] = (0.2, 0.45)
    exit_depth: tuple[float, float] = (1.05, 1.45)

    def digest(self) -> str:
        raw = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(raw).hexdigest()[:16]

    # --- checks --------------------------------------------------------------------

    @staticmethod
    def check_route(entry: str, exit: str) -> None:
        if entry not in ARMS or exit not in ARMS:
            raise UnknownRoute(f"unknown route {entry!r} -> {exit!r}; arms are {ARMS}")

    # --- per-lane value functions ----------------------------------------------------

    def _lane_coords(self, lane: Lane, x, y):
        n = _OUTWARD[lane.arm]
        r = lane.right_normal
        along = x * n[0] + y * n[1]
        # measured from the road centreline toward the lane's right edge
        lateral = x * r[0] + y * r[1]
        return along, lateral

    def lane_values(self, grid: StateGrid, lane: Lane, tol: float | None = None) -> np.ndarray:
        x, y, th, _ = grid.mesh()
        tol = self.heading_tol if tol is None else tol
        along, lat = self._lane_coords(lane, x, y)
        m, w = self.lane_margin, self.half_width
        # lanes run on into the box so the union has no zero-valued seam at its edge
        terms = (
            m - lat,
            lat - (w - m),
            -along,
            np.abs(wrap_angle(th - lane.heading)) - tol,
        )
        return _max_all(terms, grid.shape)

    def box_values(self, grid: StateGrid) -> np.ndarray:
        x, y, _, _ = grid.mesh()
        w = self.box_half_width
        return _max_all((np.abs(x) - w, np.abs(y) - w), grid.shape)

    @staticmethod
    def speed_values(grid: StateGrid, limit: float) -> np.ndarray:
        """Inside iff 0 <= v < limit.

        Standstill nodes sit exactly on the boundary, so the value rises as speed
        drops toward zero and the limits forbid braking a stopped vehicle.
        """
        v = grid.mesh()[3]
        return _max_all((-v, v - limit + SPEED_EPS), grid.shape)

    # --- route-level sets ------------------------------------------------------------

    def route_constraint(self, grid: StateGrid, entry: str, exit: str, speed_limit: float) -> LevelSetField:
        self.check_route(entry, exit)
        box = self.box_values(grid)
        road = np.minimum(
            np.minimum(self.lane_values(grid, Lane(entry, True)), box),
            self.lane_values(grid, Lane(exit, False)),
        )
        vals = np.maximum(road, self.speed_values(grid, speed_limit))
        return LevelSetField(grid, vals.astype(STORE_DTYPE))

    def entry_region(self, grid: StateGrid, arm: str) -> LevelSetField:
        self.check_route(arm, arm)
        lane = Lane(arm, True)
        x, y, th, v = grid.mesh()
        along, lat = self._lane_coords(lane, x, y)
        (a0, a1), (l0, l1), (s0, s1) = self.entry_depth, self.entry_lateral, self.entry_speed
        terms = (
            a0 - along, along - a1,
            l0 - lat, lat - l1,
            np.abs(wrap_angle(th - lane.heading)) - self.entry_heading_tol,
            s0 - v, v - s1,
        )
        return LevelSetField(grid, _max_all(terms, grid.shape).astype(STORE_DTYPE))

    def exit_region(self, grid: StateGrid, arm: str, speed_limit: float) -> LevelSetField:
        self.check_route(arm, arm)
        lane = Lane(arm, False)
        x, y, _, _ = grid.mesh()
        along, _ = self._lane_coords(lane, x, y)
        a0, a1 = self.exit_depth
        vals = _max_all(
            (a0 - along, along - a1, self.lane_values(grid, lane), self.speed_values(grid, speed_limit)),
            grid.shape,
        )
        return LevelSetField(grid, vals.astype(STORE_DTYPE))

    def in_exit_region(self, z, arm: str, speed_limit: float) -> bool:
        """Pointwise version of ``exit_region`` for continuous states."""
        lane = Lane(arm, False)
        x, y, th, v = (float(c) for c in z)
        along, lat = self._lane_coords(lane, x, y)
        m, w = self.lane_margin, self.half_width
        return (
            self.exit_depth[0] <= along <= self.exit_depth[1]
            and m <= lat <= w - m
            and abs(float(wrap_angle(th - lane.heading))) <= self.heading_tol
            and 0.0 <= v < speed_limit
        )

    def entry_pose(self, arm: str) -> tuple[float, float, float]:
        """(x, y, heading) at the middle of the entry region."""
        self.check_route(arm, arm)
        lane = Lane(arm, True)
        n, r = _OUTWARD[arm], lane.right_normal
        along, lat = 0.5 * sum(self.entry_depth), 0.5 * sum(self.entry_lateral)
        return n[0] * along + r[0] * lat, n[1] * along + r[1] * lat, lane.heading

    # --- reference path --------------------------------------------------------------

    def centerline(self, entry: str, exit: str, reach: float = 1.5, n_turn: int = 40) -> np.ndarray:
        """Polyline (N, 2) along the lane centres, joined by a cubic Bezier across the box.

        The turn starts at the box edge so that right turns keep a radius above
        the vehicle's minimum; handles of 0.4 chord approximate a circular arc.
        """
        self.check_route(entry, exit)
        lin, lout = Lane(entry, True), Lane(exit, False)
        w, c = self.box_half_width, 0.5 * self.half_width

        def point(lane: Lane, along: float):
            n, r = _OUTWARD[lane.arm], lane.right_normal
            return np.array([n[0] * along + r[0] * c, n[1] * along + r[1] * c])

        p0, p3 = point(lin, w), point(lout, w)
        d0, d3 = np.array(lin.direction), np.array(lout.direction)
        # a U-turn bulges across the box instead of pinching between the lanes
        h = w if entry == exit else 0.4 * float(np.hypot(*(p3 - p0)))
        p1, p2 = p0 + h * d0, p3 - h * d3
        s = np.linspace(0.0, 1.0, n_turn)[:, None]
        curve = (1 - s) ** 3 * p0 + 3 * (1 - s) ** 2 * s * p1 + 3 * (1 - s) * s**2 * p2 + s**3 * p3
        return np.vstack([point(lin, reach), curve, point(lout, reach)])


def _max_all(terms, shape) -> np.ndarray:
    out = np.broadcast_to(np.asarray(terms[0], dtype=float), shape)
    for t in terms[1:]:
        out = np.maximum(out, t)
    return np.asarray(out, dtype=float)
