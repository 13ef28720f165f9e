from __future__ import annotations

import math

import numpy as np
import pytest

from safecorridor.dynamics import VehicleModel
from safecorridor.errors import InfeasibleAtStart
from safecorridor.grid import LevelSetField, StateGrid, TimeStateSet, box_field
from safecorridor.layout import IntersectionLayout
from safecorridor.rollout import (
    ConstantAccelController,
    PursuitController,
    RolloutTrace,
    boundary_margin_cells,
    pure_pursuit_steer,
    rk4_step,
    rollout_vehicle,
    sample_initial_states,
    within_one_cell,
)
from safecorridor.scenario import nominal_start

M = VehicleModel()
G = StateGrid.vehicle(shape=(11, 11, 12, 9))
STRAIGHT = np.array([[-1.5, 0.0], [1.5, 0.0]])


def speed_corridor(n=21):
    vals = IntersectionLayout.speed_values(G, M.speed_limit).astype(np.float32)
    return TimeStateSet.constant_in_time(LevelSetField(G, vals), 0.0, 0.1, n)


def pursuit(path=STRAIGHT):
    return PursuitController(path, M.wheel_base, M.steer_bounds)


def never(z):
    return False


def test_pure_pursuit_on_a_straight_line():
    assert pure_pursuit_steer(STRAIGHT, (0.0, 0.0, 0.0, 0.3), 0.35, 0.32) == pytest.approx(0.0, abs=1e-12)
    left = pure_pursuit_steer(STRAIGHT, (0.0, -0.2, 0.0, 0.3), 0.35, 0.32)
    assert left > 0


def test_rk4_matches_closed_form_and_clamps_speed():
    z = rk4_step(M, np.array([0.0, 0.0, 0.0, 0.3]), (0.0, 0.2), 0.1)
    assert z[0] == pytest.approx(0.3 * 0.1 + 0.5 * 0.2 * 0.01) and z[3] == pytest.approx(0.32)
    stop = rk4_step(M, np.array([0.0, 0.0, 0.0, 0.01]), (0.0, -0.5), 0.1)
    assert stop[3] == 0.0


def test_standstill_with_full_braking_request():
    """From rest a -a_max request is floored at zero and the vehicle stays put."""
    tss = speed_corridor()
    ctrl = ConstantAccelController(pursuit(), M.accel_bounds[0])
    tr = rollout_vehicle(tss, M, ctrl, (0.0, 0.0, 0.0, 0.0), 0.0, (1.0, 1.5), never)
    assert np.all(tr.applied[:, 1] >= 0.0)
    assert np.all(tr.interval[:, 0] >= 0.0)
    assert np.allclose(tr.z[:, 3], 0.0) and np.allclose(tr.z[:, :2], 0.0)
    assert tr.controls_obey_limits() and not tr.exited


def test_trace_shape_and_csv(tmp_path):
    tss = speed_corridor()
    ctrl = ConstantAccelController(pursuit(), 0.1)
    tr = rollout_vehicle(tss, M, ctrl, (-1.0, 0.0, 0.0, 0.3), 0.0, (1.0, 1.5), never)
    assert np.allclose(np.diff(tr.t), 0.02)
    assert tr.t[-1] == pytest.approx(1.6)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",") == list(RolloutTrace.COLUMNS) and len(lines) == len(tr) + 1


def test_infeasible_start():
    with pytest.raises(InfeasibleAtStart):
        rollout_vehicle(speed_corridor(), M, pursuit(), (0.0, 0.0, 0.0, 0.7), 0.0, (1.0, 1.5), never)


def test_within_one_cell():
    tss = TimeStateSet.constant_in_time(box_field(G, {0: (-0.3, 0.3)}), 0.0, 0.1, 3)
    h = G.spacing[0]
    assert within_one_cell(tss, (0.3 + 0.9 * h, 0.0, 0.0, 0.3), 0.05)
    assert not within_one_cell(tss, (0.3 + 1.1 * h, 0.0, 0.0, 0.3), 0.05)
    # off the node planes the check is still exact
    assert within_one_cell(tss, (0.3 + 0.99 * h, 0.123, 0.4, 0.33), 0.1)


def test_boundary_margin_in_cells():
    tss = TimeStateSet.constant_in_time(LevelSetField.from_function(G, lambda x, y, th, v: x + 0 * y), 0.0, 0.1, 3)
    assert boundary_margin_cells(tss, (-0.3, 0.0, 0.0, 0.3), 0.1) == pytest.approx(0.3 / G.spacing[0], rel=1e-4)


def test_sampled_states_are_inside():
    tss = TimeStateSet.constant_in_time(box_field(G, {0: (-0.5, 0.2), 3: (0.1, 0.5)}), 0.0, 0.1, 3)
    zs = sample_initial_states(tss, 0.1, 50, np.random.default_rng(0))
    assert zs.shape == (50, 4)
    assert all(tss.value_at(z, 0.1) <= 0 for z in zs)
    with pytest.raises(InfeasibleAtStart):
        sample_initial_states(TimeStateSet.constant_in_time(LevelSetField.constant(G, 1.0), 0, 0.1, 2), 0.0, 1,
                              np.random.default_rng(0))


def test_full_throttle_request_still_exits_in_window(perpendicular):
    """A +a_max request is saturated by the limits and the vehicle exits within the window +- dt."""
    m = perpendicular.manager
    for o in perpendicular.granted():
        r = o.reservation
        entry, exit = r.route
        c = o.vehicle.controller
        z0 = nominal_start(r.corridor, r.entry_window[0], (*m.layout.entry_pose(entry), c.cruise_speed))
        ctrl = ConstantAccelController(pursuit(m.layout.centerline(entry, exit)), m.model.accel_bounds[1])
        tr = rollout_vehicle(
            r.corridor, m.model, ctrl, z0, r.entry_window[0], r.exit_window,
            lambda z, a=exit: m.layout.in_exit_region(z, a, m.model.speed_limit), fallback="optimal",
        )
        assert tr.exited
        assert r.exit_window[0] - m.solver.dt - 1e-9 <= tr.exit_time <= r.exit_window[1] + m.solver.dt + 1e-9
        assert tr.controls_obey_limits()
        assert all(within_one_cell(r.corridor, z, t) for z, t in zip(tr.z, tr.t))


def test_nominal_rollouts_obey_limits(perpendicular):
    for o in perpendicular.granted():
        assert o.trace.exited and o.trace.controls_obey_limits()
        assert math.isfinite(o.trace.exit_time)
