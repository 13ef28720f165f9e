"""Closed-loop vehicles driven through their corridors under the limits filter.

The nominal controllers only exist to exercise the filter: pure-pursuit
steering along the route centreline plus either proportional speed tracking
or a random acceleration request. Every requested acceleration is saturated
into the interval returned by ``driving_limits`` before it is applied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .errors import InfeasibleAtStart
from .grid import TimeStateSet, interpolate_many
from .limits import driving_limits, local_expansion

INTEGRATION_DIVISOR = 5  # integration step is dt / 5


class Controller(Protocol):
    def __call__(self, t: float, z: np.ndarray) -> tuple[float, float]:
        """Requested (steer, accel) at time ``t`` and state ``z``."""


def pure_pursuit_steer(path: np.ndarray, z, lookahead: float, wheel_base: float) -> float:
    """Steering angle toward the point ``lookahead`` metres ahead on ``path``."""
    x, y, th = float(z[0]), float(z[1]), float(z[2])
    seg = np.diff(path, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    # project onto every segment, keep the nearest foot point
    rel = np.array([x, y]) - path[:-1]
    s = np.clip(np.einsum("ij,ij->i", rel, seg) / np.maximum(seg_len**2, 1e-12), 0.0, 1.0)
    foot = path[:-1] + s[:, None] * seg
    i = int(np.argmin(np.hypot(*(foot - [x, y]).T)))
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    target_s = cum[i] + s[i] * seg_len[i] + lookahead
    j = min(int(np.searchsorted(cum, target_s)), len(path) - 1)
    if j == 0:
        tx, ty = path[0]
    elif target_s >= cum[-1]:
        # run on past the end along the last segment
        d = seg[-1] / max(seg_len[-1], 1e-12)
        tx, ty = path[-1] + d * (target_s - cum[-1])
    else:
        f = (target_s - cum[j - 1]) / max(seg_len[j - 1], 1e-12)
        tx, ty = path[j - 1] + f * seg[j - 1]
    alpha = math.atan2(ty - y, tx - x) - th
    ld = max(math.hypot(tx - x, ty - y), 1e-6)
    return math.atan2(2.0 * wheel_base * math.sin(alpha), ld)


@dataclass
class PursuitController:
    path: np.ndarray
    wheel_base: float
    steer_bounds: tuple[float, float]
    cruise_speed: float = 0.4
    kp: float = 1.0
    lookahead: float = 0.35

    def steer(self, z) -> float:
        d = pure_pursuit_steer(self.path, z, self.lookahead, self.wheel_base)
        return min(max(d, self.steer_bounds[0]), self.steer_bounds[1])

    def __call__(self, t, z):
        return self.steer(z), self.kp * (self.cruise_speed - float(z[3]))


@dataclass
class RandomAccelController:
    """Pure-pursuit steering with a piecewise-constant random acceleration request."""

    pursuit: PursuitController
    rng: np.random.Generator
    accel_bounds: tuple[float, float]
    hold: float = 0.5  # seconds between new draws
    _next: float = field(default=-math.inf, repr=False)
    _accel: float = field(default=0.0, repr=False)

    def __call__(self, t, z):
        if t >= self._next:
            self._accel = float(self.rng.uniform(*self.accel_bounds))
            self._next = t + self.hold
        return self.pursuit.steer(z), self._accel


@dataclass(frozen=True)
class ConstantAccelController:
    pursuit: PursuitController
    accel: float

    def __call__(self, t, z):
        return self.pursuit.steer(z), self.accel


@dataclass(eq=False)
class RolloutTrace:
    """Per-step record of one closed-loop run."""

    t: np.ndarray
    z: np.ndarray  # (n, 4)
    requested: np.ndarray  # (n, 2) steer, accel
    applied: np.ndarray  # (n, 2)
    value: np.ndarray  # corridor value at (z, t)
    interval: np.ndarray  # (n, 2) admissible accel interval, NaN if infeasible
    feasible: np.ndarray
    exited: bool
    exit_time: float | None

    COLUMNS = (
        "t", "x", "y", "theta", "v", "steer_req", "accel_req", "steer", "accel",
        "value", "accel_min", "accel_max", "feasible",
    )

    def __len__(self) -> int:
        return len(self.t)

    def rows(self):
        for k in range(len(self)):
            yield (
                self.t[k], *self.z[k], *self.requested[k], *self.applied[k],
                self.value[k], *self.interval[k], int(self.feasible[k]),
            )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.rows():
                w.writerow([_fmt(x) for x in r])

    def controls_obey_limits(self, tol: float = 1e-12) -> bool:
        """Applied accelerations lie in the queried interval on every feasible step."""
        ok = self.feasible
        a = self.applied[ok, 1]
        return bool(np.all(a >= self.interval[ok, 0] - tol) and np.all(a <= self.interval[ok, 1] + tol))


def _fmt(x) -> str:
    return repr(round(float(x), 9)) if isinstance(x, (float, np.floating)) else str(x)


def rk4_step(model, z: np.ndarray, u, h: float) -> np.ndarray:
    f = lambda s: model.flow(s, u)  # noqa: E731
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    out = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    out[2] = math.atan2(math.sin(out[2]), math.cos(out[2]))
    # a stopped car does not roll backward
    out[3] = max(out[3], 0.0)
    return out


def corridor_value(corridor: TimeStateSet, z, t: float) -> float:
    return corridor.value_at(z, t, kind="safe")


def descent_control(corridor: TimeStateSet, model, z, t: float, steer: float | None = None):
    """Control pair that decreases the corridor value fastest (bang-bang on both channels).

    With ``steer`` given only the acceleration is chosen.
    """
    g = local_expansion(corridor, z, t).grad
    lo_a, hi_a = model.accel_bounds
    accel = lo_a if g[3] > 0 else hi_a
    if steer is None:
        k = g[2] * float(z[3])  # d/d(tan steer) of grad V . f, up to 1/L
        lo_s, hi_s = model.steer_bounds
        steer = lo_s if k > 0 else hi_s if k < 0 else 0.0
    return float(steer), float(accel)


def within_one_cell(corridor: TimeStateSet, z, t: float) -> bool:
    """True iff the interpolated corridor comes within one cell of ``z`` in every coordinate.

    Checks the box ``z +- spacing`` at both bracketing slices. The interpolant
    is multilinear on each grid cell, so its minimum over the box sits at a
    vertex of the box cut by the node planes; those vertices are evaluated.
    """
    grid = corridor.grid
    z = grid.wrap(np.asarray(z, dtype=float))
    k0, k1, _ = corridor.bracket(t)
    coords = []
    for d in range(grid.ndim):
        lo, h = grid.bounds[d][0], grid.spacing[d]
        a, b = z[d] - h, z[d] + h
        inner = lo + h * np.arange(math.floor((a - lo) / h) + 1, math.ceil((b - lo) / h))
        c = np.concatenate([[a], inner, [b]])
        if not grid.periodic[d]:
            c = np.clip(c, *grid.bounds[d])
        coords.append(c)
    pts = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, grid.ndim)
    return any(float(interpolate_many(corridor.values[k], grid, pts).min()) <= 0.0 for k in {k0, k1})


def rollout_vehicle(
    corridor: TimeStateSet,
    model,
    controller: Controller,
    z0,
    t0: float,
    exit_window: tuple[float, float],
    in_exit: Callable[[np.ndarray], bool],
    step: float | None = None,
    fallback: str = "descent",
    delta_t: float | None = None,
) -> RolloutTrace:
    """Integrate one vehicle from ``(z0, t0)`` with accelerations saturated by the limits.

    Stops at the first step inside the exit region during the exit window
    (padded by one slice), when the corridor time runs out, or when the state
    leaves the grid. Off-corridor
    steps, which the filter cannot repair, apply the acceleration that pushes
    the value down fastest.
    """
    step = corridor.dt / INTEGRATION_DIVISOR if step is None else float(step)
    z = corridor.grid.wrap(np.asarray(z0, dtype=float))
    if corridor_value(corridor, z, t0) > 0.0:
        raise InfeasibleAtStart(f"initial state is outside the corridor at t={t0}")
    t_stop = min(exit_window[1] + corridor.dt, corridor.t_end)
    n_max = int(math.floor((t_stop - t0) / step + 1e-9))
    lo_a, hi_a = model.accel_bounds
    T, Z, REQ, APP, VAL, INT, FEAS = [], [], [], [], [], [], []
    exited, t_exit, last = False, None, None
    for n in range(n_max + 1):
        t = t0 + n * step
        if np.any(z < corridor.grid.lower) or np.any(z > corridor.grid.upper):
            break  # left the modelled region without exiting
        steer_req, accel_req = controller(t, z)
        steer = min(max(float(steer_req), model.steer_bounds[0]), model.steer_bounds[1])
        lim = driving_limits(corridor, model, z, steer, t, delta_t)
        req = min(max(float(accel_req), lo_a), hi_a)
        if lim.feasible:
            accel = lim.saturate(req)
            last = lim
        elif fallback == "brake":
            accel = lo_a
        elif fallback == "hold" and last is not None:
            accel = last.saturate(req)
        elif fallback == "optimal":
            steer, accel = descent_control(corridor, model, z, t)
        else:
            accel = lo_a if lim.b > 0 else hi_a
        T.append(t)
        Z.append(z.copy())
        REQ.append((float(steer_req), float(accel_req)))
        APP.append((steer, accel))
        VAL.append(lim.value)
        INT.append(lim.accel_interval if lim.feasible else (math.nan, math.nan))
        FEAS.append(lim.feasible)
        if exit_window[0] - corridor.dt - 1e-9 <= t and in_exit(z):
            exited, t_exit = True, t
            break
        if n == n_max:
            break
        z = rk4_step(model, z, (steer, accel), step)
    return RolloutTrace(
        np.array(T), np.array(Z), np.array(REQ), np.array(APP), np.array(VAL),
        np.array(INT, dtype=float), np.array(FEAS, dtype=bool), exited, t_exit,
    )


def sample_initial_states(
    corridor: TimeStateSet, t: float, n: int, rng: np.random.Generator, max_tries: int = 200
) -> np.ndarray:
    """``n`` continuous states with corridor value <= 0 at time ``t`` (rejection sampling)."""
    grid = corridor.grid
    k = corridor.index_of(t)
    inside = np.argwhere(corridor.values[k] <= 0.0)
    if len(inside) == 0:
        raise InfeasibleAtStart(f"corridor is empty at t={t}")
    out = []
    for _ in range(n * max_tries):
        node = inside[rng.integers(len(inside))]
        z = np.array([grid.axes[d][node[d]] for d in range(grid.ndim)])
        z = z + rng.uniform(-0.5, 0.5, grid.ndim) * grid.spacing
        z = grid.wrap(np.clip(z, grid.lower, grid.upper))
        if float(interpolate_many(corridor.values[k], grid, z[None])[0]) <= 0.0:
            out.append(z)
            if len(out) == n:
                return np.array(out)
    raise InfeasibleAtStart(f"could not sample {n} states inside the corridor at t={t}")


def boundary_margin_cells(corridor: TimeStateSet, z, t: float) -> float:
    """Approximate distance from ``z`` to the corridor boundary, in grid cells.

    First-order estimate ``-V / |grad V|`` with the gradient scaled to cell
    units; positive inside.
    """
    loc = local_expansion(corridor, z, t)
    g = float(np.linalg.norm(loc.grad * corridor.grid.spacing))
    if g == 0.0:
        return math.inf if loc.value <= 0 else -math.inf
    return -loc.value / g


@dataclass(frozen=True)
class Trial:
    """Outcome of one randomized closed-loop run."""

    start: tuple[float, ...]
    start_margin: float  # cells
    stayed: bool  # within one cell of the corridor at every step
    exited: bool  # reached the exit region inside the exit window +- dt
    max_value: float
    steps: int

    @property
    def ok(self) -> bool:
        return self.stayed and self.exited


def random_trials(
    corridor: TimeStateSet,
    model,
    path: np.ndarray,
    exit_window: tuple[float, float],
    in_exit: Callable[[np.ndarray], bool],
    t0: float,
    n: int,
    rng: np.random.Generator,
    fallback: str = "optimal",
) -> list[Trial]:
    """``n`` rollouts from random corridor states at ``t0`` under random accelerations."""
    pursuit = PursuitController(path, model.wheel_base, model.steer_bounds)
    out = []
    for z0 in sample_initial_states(corridor, t0, n, rng):
        ctrl = RandomAccelController(pursuit, rng, model.accel_bounds)
        tr = rollout_vehicle(corridor, model, ctrl, z0, t0, exit_window, in_exit, fallback=fallback)
        stayed = all(within_one_cell(corridor, z, t) for z, t in zip(tr.z, tr.t))
        lo, hi = exit_window[0] - corridor.dt - 1e-9, exit_window[1] + corridor.dt + 1e-9
        exited = tr.exited and lo <= tr.exit_time <= hi
        out.append(Trial(
            tuple(float(c) for c in z0), boundary_margin_cells(corridor, z0, t0), stayed, exited,
            float(np.max(tr.value)), len(tr),
        ))
    return out
