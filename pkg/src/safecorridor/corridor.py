"""The four passes that turn a route request into a reserved corridor.

Pass 1 is the offline backward tube toward the exit under the static road
constraint. Pass 2 removes trajectories that meet higher-priority vehicles,
re-solving only up to the end of the danger window and reusing Pass 1 after
it. Pass 3 grows a forward tube from the entry window inside Pass 2. Pass 4
picks the earliest exit window of length delta and solves backward from it
inside Pass 3, which leaves a narrow corridor.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EntryInfeasible, ExitInfeasible, TimeRangeMismatch
from .grid import (
    STORE_DTYPE,
    LevelSetField,
    StateGrid,
    TimeStateSet,
    containment_margin,
    load_tss,
    save_tss,
)
from .layout import IntersectionLayout
from .reach import CFL, backward_tube, forward_tube
from .tlt import build_intersection_spec, evaluate

_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EntryExitSpec:
    entry_region: LevelSetField
    entry_window: tuple[float, float]
    exit_region: LevelSetField
    delta: float

    def __post_init__(self):
        ta, tb = (float(t) for t in self.entry_window)
        if not ta < tb:
            raise ValueError(f"entry window [{ta}, {tb}] must have t_a < t_b")
        if not self.delta > 0:
            raise ValueError("exit window length must be positive")
        if self.entry_region.is_empty() or self.exit_region.is_empty():
            raise ValueError("entry and exit regions must be nonempty")
        object.__setattr__(self, "entry_window", (ta, tb))
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(eq=False)
class PassResult:
    phi1: TimeStateSet
    phi2: TimeStateSet
    phi3: TimeStateSet
    phi4: TimeStateSet
    exit_window: tuple[float, float]
    danger_window: tuple[float, float] | None = None
    timings: dict[str, float] = field(default_factory=dict)


def lattice(horizon: float, dt: float) -> int:
    """Number of slices on ``[0, horizon]``."""
    n = horizon / dt
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")
    return int(round(n)) + 1


def route_sets(
    layout: IntersectionLayout, grid: StateGrid, model, entry: str, exit: str, horizon: float, dt: float
) -> tuple[TimeStateSet, TimeStateSet]:
    """Static goal (exit region) and road constraint held over the horizon."""
    n = lattice(horizon, dt)
    cons = layout.route_constraint(grid, entry, exit, model.speed_limit)
    goal = layout.exit_region(grid, exit, model.speed_limit)
    return TimeStateSet.constant_in_time(goal, 0.0, dt, n), TimeStateSet.constant_in_time(cons, 0.0, dt, n)


# --- pass 1 ----------------------------------------------------------------------------


class Pass1Table:
    """Directory of precomputed Pass-1 tubes plus a JSON manifest.

    With ``root=None`` the table lives in memory only.
    """

    MANIFEST = "manifest.json"

    def __init__(self, root: str | Path | None = None):
        self.root = None if root is None else Path(root)
        self._mem: dict[str, TimeStateSet] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(entry: str, exit: str, grid: StateGrid, model, layout: IntersectionLayout, horizon: float, dt: float) -> dict:
        return {
            "entry_loc": entry,
            "exit_loc": exit,
            "grid_hash": grid.digest(),
            "model_hash": model.digest(),
            "layout_hash": layout.digest(),
            "horizon": float(horizon),
            "dt": float(dt),
        }

    @staticmethod
    def _name(key: dict) -> str:
        raw = json.dumps(key, sort_keys=True).encode()
        return f"{key['entry_loc']}-{key['exit_loc']}-{hashlib.sha256(raw).hexdigest()[:12]}.tss"

    def _manifest(self) -> list[dict]:
        path = self.root / self.MANIFEST
        if not path.exists():
            return []
        return json.loads(path.read_text())

    def get(self, key: dict) -> TimeStateSet | None:
        name = self._name(key)
        if name in self._mem:
            return self._mem[name]
        if self.root is None:
            return None
        for rec in self._manifest():
            if rec["key"] == key and (self.root / rec["file"]).exists():
                tss = load_tss(self.root / rec["file"])
                self._mem[name] = tss
                return tss
        return None

    def put(self, key: dict, tss: TimeStateSet) -> None:
        name = self._name(key)
        self._mem[name] = tss
        if self.root is None:
            return
        save_tss(self.root / name, tss)
        recs = [r for r in self._manifest() if r["key"] != key]
        recs.append({"key": key, "file": name})
        recs.sort(key=lambda r: r["file"])
        (self.root / self.MANIFEST).write_text(json.dumps(recs, indent=1, sort_keys=True) + "\n")


def pass1_offline(
    model,
    goal: TimeStateSet,
    constraint: TimeStateSet,
    table: Pass1Table | None = None,
    key: dict | None = None,
    backend: str = "auto",
    cfl: float = CFL,
) -> TimeStateSet:
    """Backward tube toward the exit under the static road constraint, cached by ``key``."""
    if table is not None and key is not None:
        hit = table.get(key)
        if hit is not None:
            return hit
    tree = evaluate(build_intersection_spec(goal, constraint), model=model, backend=backend, cfl=cfl)
    phi1 = tree.root
    if table is not None and key is not None:
        table.put(key, phi1)
    return phi1


# --- pass 2 ----------------------------------------------------------------------------


def danger_window(dangers: TimeStateSet | None) -> tuple[float, float] | None:
    """Occupied span of the danger set, widened by one slice each way."""
    if dangers is None:
        return None
    span = dangers.occupied_span()
    if span is None:
        return None
    lo = max(dangers.t0, span[0] - dangers.dt)
    hi = min(dangers.t_end, span[1] + dangers.dt)
    return lo, hi


def pass2_online(
    model,
    phi1: TimeStateSet,
    goal: TimeStateSet,
    constraint: TimeStateSet,
    dangers: TimeStateSet | None,
    window: tuple[float, float] | None,
    backend: str = "auto",
    cfl: float = CFL,
) -> TimeStateSet:
    """Pass 1 with every trajectory that touches ``dangers`` during ``window`` removed.

    The re-solve starts from Pass 1's slice at the window's end and runs back to
    the first slice; after the window the result is Pass 1 unchanged.
    """
    if dangers is None or window is None:
        return phi1
    k_hi = phi1.index_of(_snap(window[1], phi1))
    sl = slice(0, k_hi + 1)

    def head(tss):
        return TimeStateSet(tss.grid, tss.t0, tss.dt, tss.values[sl])

    spec = build_intersection_spec(head(goal), head(constraint), [head(dangers)])
    tree = evaluate(spec, model=model, terminal=phi1.slice(k_hi), backend=backend, cfl=cfl)
    out = np.empty(phi1.values.shape, dtype=STORE_DTYPE)
    out[sl] = tree.root.values
    out[k_hi + 1 :] = phi1.values[k_hi + 1 :]
    return TimeStateSet(phi1.grid, phi1.t0, phi1.dt, out)


def _snap(t: float, tss: TimeStateSet) -> float:
    k = min(max(int(round((t - tss.t0) / tss.dt)), 0), len(tss) - 1)
    return tss.t0 + k * tss.dt


# --- pass 3 ----------------------------------------------------------------------------


def pass3_entry(
    model,
    phi2: TimeStateSet,
    spec: EntryExitSpec,
    backend: str = "auto",
    cfl: float = CFL,
    margin: float | None = None,
) -> TimeStateSet:
    """Forward tube from the entry time-state set, constrained to Pass 2.

    The first-order scheme erodes the leading front of a forward tube (the
    fastest vehicles fall behind it by more than a second over the horizon),
    so the tube is widened by ``margin`` before it is clipped to Pass 2. The
    default is the finest grid spacing, i.e. the tube is outer-approximated by
    one cell.
    """
    try:
        entry = TimeStateSet.on_window(spec.entry_region, spec.entry_window, phi2.t0, phi2.dt)
    except TimeRangeMismatch as exc:
        raise EntryInfeasible(str(exc)) from exc
    if entry.t_end > phi2.t_end + _TOL:
        raise EntryInfeasible("entry window extends past the corridor horizon")
    leak = containment_margin(phi2, entry)
    if leak > 0.0:
        raise EntryInfeasible(f"entry set leaves the Pass-2 set by {leak:.4g}", leak)
    tube = forward_tube(model, entry, phi2, span=(entry.t0, phi2.t_end), backend=backend, cfl=cfl)
    margin = float(phi2.grid.spacing.min()) if margin is None else float(margin)
    if margin == 0.0:
        return tube
    k0 = phi2.index_of(tube.t0)
    outer = np.maximum(tube.values - margin, phi2.values[k0 : k0 + len(tube)])
    return TimeStateSet(tube.grid, tube.t0, tube.dt, outer.astype(tube.values.dtype))


# --- exit window and pass 4 ---------------------------------------------------------------


def exit_occupancy(phi3: TimeStateSet, exit_region: LevelSetField) -> np.ndarray:
    """Per-slice minimum of Pass 3 intersected with the exit region."""
    both = np.maximum(phi3.values, exit_region.values[None])
    return both.reshape(len(phi3), -1).min(axis=1)


def earliest_window(times: np.ndarray, nonempty: np.ndarray, delta: float, dt: float) -> tuple[float, float] | None:
    """Smallest slice time tau with every slice time in [tau, tau + delta] flagged."""
    n = int(math.floor(delta / dt + 1e-6))
    K = len(times)
    run = 0
    # scan backward so runs[k] counts consecutive flagged slices starting at k
    runs = np.zeros(K, dtype=int)
    for k in range(K - 1, -1, -1):
        run = run + 1 if nonempty[k] else 0
        runs[k] = run
    for k in range(K):
        if runs[k] >= n + 1 and times[k] + delta <= times[-1] + 1e-9:
            return float(times[k]), float(times[k] + delta)
    return None


def select_exit_window(phi3: TimeStateSet, exit_region: LevelSetField, delta: float) -> tuple[float, float]:
    """Earliest ``[t, t + delta]`` during which Pass 3 meets the exit region at every slice."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if delta > phi3.t_end - phi3.t0 + _TOL:
        raise ValueError(f"delta {delta} exceeds the horizon")
    occ = exit_occupancy(phi3, exit_region)
    nonempty = occ <= -phi3.grid.eps_empty
    win = earliest_window(phi3.times, nonempty, delta, phi3.dt)
    if win is None:
        raise ExitInfeasible(f"no exit window of length {delta} s", float(occ.min()))
    return win


def pass4_exit(
    model,
    phi3: TimeStateSet,
    exit_window: tuple[float, float],
    exit_region: LevelSetField,
    backend: str = "auto",
    phi2: TimeStateSet | None = None,
    cfl: float = CFL,
) -> TimeStateSet:
    """Backward tube from the exit time-state set, constrained to Pass 3.

    Containment of the exit target is read as: Pass 3 meets the exit region at
    every slice of the window. When ``phi2`` is given the tube is solved inside
    Pass 2 and intersected with Pass 3 afterwards. Any Pass-2 trajectory from a
    Pass-3 state stays in Pass 3 (Pass 3 is forward closed inside Pass 2), so
    both forms describe the same set; the second loses far less to dissipation
    because Pass 2 is much deeper than the thin Pass-3 tube.
    """
    ta, tb = exit_window
    if tb > phi3.t_end + _TOL or ta < phi3.t0 - _TOL:
        raise ExitInfeasible(f"exit window [{ta}, {tb}] lies outside the horizon")
    try:
        win = TimeStateSet.on_window(exit_region, exit_window, phi3.t0, phi3.dt)
    except TimeRangeMismatch as exc:
        raise ExitInfeasible(str(exc)) from exc
    k0 = phi3.index_of(win.t0)
    hit = np.maximum(phi3.values[k0 : k0 + len(win)], exit_region.values[None])
    mins = hit.reshape(len(win), -1).min(axis=1)
    if (mins > -phi3.grid.eps_empty).any():
        raise ExitInfeasible("Pass 3 misses the exit region during the exit window", float(mins.max()))
    start = phi3.occupied_span()
    span = (phi3.t0 if start is None else start[0], win.t_end)
    if phi2 is None:
        goal = TimeStateSet(phi3.grid, win.t0, phi3.dt, hit)
        return backward_tube(model, goal, phi3, span=span, backend=backend, cfl=cfl)
    tube = backward_tube(model, win, phi2, span=span, backend=backend, cfl=cfl)
    return TimeStateSet(phi3.grid, phi3.t0, phi3.dt, np.maximum(tube.values, phi3.values))


# --- the whole pipeline --------------------------------------------------------------------


def run_passes(
    model,
    phi1: TimeStateSet,
    goal: TimeStateSet,
    constraint: TimeStateSet,
    spec: EntryExitSpec,
    dangers: TimeStateSet | None = None,
    backend: str = "auto",
    cfl: float = CFL,
    forward_margin: float | None = None,
) -> PassResult:
    """Passes 2 to 4 for one vehicle, with wall-clock timings per pass."""
    timings = {}
    window = danger_window(dangers)
    t = time.perf_counter()
    phi2 = pass2_online(model, phi1, goal, constraint, dangers, window, backend, cfl)
    timings["pass2"] = time.perf_counter() - t if window is not None else 0.0
    t = time.perf_counter()
    phi3 = pass3_entry(model, phi2, spec, backend, cfl, forward_margin)
    timings["pass3"] = time.perf_counter() - t
    t = time.perf_counter()
    exit_window = select_exit_window(phi3, spec.exit_region, spec.delta)
    phi4 = pass4_exit(model, phi3, exit_window, spec.exit_region, backend, phi2, cfl)
    timings["pass4"] = time.perf_counter() - t
    timings["total"] = timings["pass2"] + timings["pass3"] + timings["pass4"]
    return PassResult(phi1, phi2, phi3, phi4, exit_window, window, timings)
