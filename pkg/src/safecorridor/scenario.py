"""Scenario runner: admit every vehicle, roll it out under the limits filter, write evidence.

Output layout under ``out``::

    report.json                 admissions, exit windows, rollout summaries (no wall-clock data)
    timing.csv                  vehicle x {pass2, pass3, pass4, total} seconds
    corridors/<res-id>.tss      reserved corridor of every granted vehicle
    traces/<vehicle>.csv        closed-loop rollout
    slices/*.csv                x-y and x-t slices for plotting

Everything except ``timing.csv`` is a pure function of the config.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, VehicleConfig
from .corridor import Pass1Table
from .errors import CorridorError, InfeasibleAtStart, OutOfBounds
from .grid import TimeStateSet, save_tss, wrap_angle
from .manager import CorridorReservation, IntersectionManager
from .rollout import PursuitController, RolloutTrace, rollout_vehicle

log = logging.getLogger(__name__)

PASS_NAMES = ("phi1", "phi2", "phi3", "phi4")


@dataclass
class VehicleOutcome:
    vehicle: VehicleConfig
    reservation: CorridorReservation | None = None
    error: CorridorError | None = None
    trace: RolloutTrace | None = None
    start: np.ndarray | None = None

    @property
    def granted(self) -> bool:
        return self.reservation is not None

    def summary(self) -> dict:
        v = self.vehicle
        out = {
            "id": v.id,
            "entry": v.entry,
            "exit": v.exit,
            "entry_window": list(v.entry_window),
            "delta": v.delta,
            "granted": self.granted,
        }
        if self.error is not None:
            out["error"] = self.error.code
            out["message"] = str(self.error)
            margin = getattr(self.error, "margin", None)
            if margin is not None and np.isfinite(margin):
                out["margin"] = round(float(margin), 9)
        if self.reservation is not None:
            r = self.reservation
            out.update(reservation_id=r.reservation_id, rank=r.rank, exit_window=[round(t, 9) for t in r.exit_window])
        if self.trace is not None:
            tr = self.trace
            out["rollout"] = {
                "start": [round(float(c), 9) for c in self.start],
                "steps": len(tr),
                "exited": tr.exited,
                "exit_time": None if tr.exit_time is None else round(tr.exit_time, 9),
                "max_value": round(float(np.max(tr.value)), 9),
                "infeasible_steps": int((~tr.feasible).sum()),
                "controls_obey_limits": tr.controls_obey_limits(),
            }
        return out


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    manager: IntersectionManager
    outcomes: list[VehicleOutcome] = field(default_factory=list)

    def granted(self) -> list[VehicleOutcome]:
        return [o for o in self.outcomes if o.granted]

    def report(self) -> dict:
        return {
            "scenario": self.config.name,
            "description": self.config.description,
            "vehicles": [o.summary() for o in self.outcomes],
        }


def build_manager(config: ScenarioConfig, table: Pass1Table | None = None) -> IntersectionManager:
    return IntersectionManager(
        grid=config.grid.build(),
        model=config.model.build(),
        layout=config.layout,
        solver=config.solver,
        table=table,
        footprint_radius=config.footprint_radius,
        scheduling_horizon=config.scheduling_horizon,
    )


def nominal_start(corridor: TimeStateSet, t: float, target) -> np.ndarray:
    """Inside node at slice time ``t`` nearest ``target`` in cell units (first on ties)."""
    grid = corridor.grid
    inside = np.argwhere(corridor.values[corridor.index_of(t)] <= 0.0)
    if len(inside) == 0:
        raise InfeasibleAtStart(f"corridor is empty at t={t}")
    nodes = np.stack([grid.axes[d][inside[:, d]] for d in range(grid.ndim)], axis=1)
    diff = nodes - np.asarray(target, dtype=float)
    for d, per in enumerate(grid.periodic):
        if per:
            diff[:, d] = wrap_angle(diff[:, d])
    return nodes[int(np.argmin(np.linalg.norm(diff / grid.spacing, axis=1)))]


def roll_out(manager: IntersectionManager, res: CorridorReservation, vehicle: VehicleConfig):
    """Nominal closed-loop run from the corridor node nearest the entry pose at cruise speed.

    Off-corridor steps hand both channels to the value-descent control.
    """
    entry, exit = res.route
    c = vehicle.controller
    ctrl = PursuitController(
        manager.layout.centerline(entry, exit), manager.model.wheel_base, manager.model.steer_bounds,
        c.cruise_speed, c.kp, c.lookahead,
    )
    t0 = res.entry_window[0]
    lay = manager.layout
    z0 = nominal_start(res.corridor, t0, (*lay.entry_pose(entry), c.cruise_speed))
    limit = manager.model.speed_limit
    trace = rollout_vehicle(
        res.corridor, manager.model, ctrl, z0, t0, res.exit_window,
        lambda z: lay.in_exit_region(z, exit, limit), fallback="optimal",
    )
    return z0, trace


def run_scenario(
    config: ScenarioConfig, out: str | Path | None = None, table: Pass1Table | None = None
) -> ScenarioResult:
    """Admit the vehicles in config order, roll each granted one out, and write the outputs."""
    manager = build_manager(config, table)
    result = ScenarioResult(config, manager)
    for v in config.vehicles:
        outcome = VehicleOutcome(v)
        try:
            outcome.reservation = manager.reserve(v.id, v.entry, v.entry_window, v.exit, v.delta)
        except CorridorError as exc:
            log.info("vehicle %s rejected: %s", v.id, exc)
            outcome.error = exc
        result.outcomes.append(outcome)
    if config.rollout:
        for o in result.granted():
            o.start, o.trace = roll_out(manager, o.reservation, o.vehicle)
    if out is not None:
        write_outputs(result, Path(out))
    return result


# --- outputs -------------------------------------------------------------------------


def write_timing(path: Path, outcomes: list[VehicleOutcome]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vehicle", "pass2", "pass3", "pass4", "total"])
        for o in outcomes:
            if o.granted:
                t = o.reservation.timings
                w.writerow([o.vehicle.id] + [f"{t[k]:.4f}" for k in ("pass2", "pass3", "pass4", "total")])


def write_outputs(result: ScenarioResult, out: Path) -> None:
    cfg = result.config
    for sub in ("corridors", "traces", "slices"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for o in result.granted():
        res = o.reservation
        save_tss(out / "corridors" / f"{res.reservation_id}.tss", res.corridor)
        if o.trace is not None:
            o.trace.to_csv(out / "traces" / f"{o.vehicle.id}.csv")
        for name in cfg.export.passes:
            tss = _pass_set(res, name)
            for t in cfg.export.xy_times:
                if tss.covers(t):
                    export_slice(tss, "xy", t, out / "slices" / f"{o.vehicle.id}_{name}_xy_t{t:g}.csv")
            if cfg.export.xt_at_y is not None:
                y = cfg.export.xt_at_y
                export_slice(tss, "xt", y, out / "slices" / f"{o.vehicle.id}_{name}_xt_y{y:g}.csv")
    write_timing(out / "timing.csv", result.outcomes)
    (out / "report.json").write_text(json.dumps(result.report(), indent=1, sort_keys=True) + "\n")


def _pass_set(res: CorridorReservation, name: str) -> TimeStateSet:
    if name == "phi4":
        return res.corridor
    if name == "danger":
        return res.danger.tss
    if res.passes is None or name not in PASS_NAMES:
        raise KeyError(f"pass {name!r} is not available")
    return getattr(res.passes, name)


# --- slices --------------------------------------------------------------------------


def slice_table(tss: TimeStateSet, kind: str, coordinate: float) -> tuple[tuple[str, str], np.ndarray, np.ndarray, np.ndarray]:
    """Reduced 2-D table of a time-state set.

    ``kind="xy"``: values over (x, y) at time ``coordinate``, minimised over
    heading and speed. ``kind="xt"``: values over (x, t) at ``y = coordinate``,
    minimised over heading and speed. Off-lattice coordinates interpolate
    linearly between the neighbouring slices or nodes.
    """
    grid = tss.grid
    c = float(coordinate)
    if kind == "xy":
        if not np.isfinite(c) or not tss.covers(c):
            raise OutOfBounds(f"t={coordinate} outside [{tss.t0}, {tss.t_end}]")
        k0, k1, f = tss.bracket(c)
        vals = (1.0 - f) * tss.values[k0].astype(float) + f * tss.values[k1].astype(float)
        return ("x", "y"), grid.axes[0], grid.axes[1], vals.min(axis=(2, 3))
    if kind == "xt":
        lo, hi = grid.bounds[1]
        if not np.isfinite(c) or not lo <= c <= hi:
            raise OutOfBounds(f"y={coordinate} outside [{lo}, {hi}]")
        s = (c - lo) / grid.spacing[1]
        j = min(int(np.floor(s)), grid.shape[1] - 2)
        f = s - j
        vals = (1.0 - f) * tss.values[:, :, j].astype(float) + f * tss.values[:, :, j + 1].astype(float)
        return ("x", "t"), grid.axes[0], tss.times, vals.min(axis=(2, 3)).T
    raise ValueError(f"kind must be 'xy' or 'xt', got {kind!r}")


def export_slice(tss: TimeStateSet, kind: str, coordinate: float, path: str | Path | None = None) -> list[tuple]:
    """Rows ``(coord1, coord2, value)``; also written as CSV when ``path`` is given."""
    names, a, b, vals = slice_table(tss, kind, coordinate)
    rows = [(float(a[i]), float(b[j]), float(vals[i, j])) for i in range(len(a)) for j in range(len(b))]
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*names, "value"])
            for r in rows:
                w.writerow([repr(round(x, 9)) for x in r])
    return rows
