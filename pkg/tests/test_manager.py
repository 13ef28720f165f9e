from __future__ import annotations

import threading

import numpy as np
import pytest

from oracles import brute_force_dilation
from safecorridor.errors import HorizonExceeded, UnknownReservation, UnknownRoute
from safecorridor.grid import TimeStateSet, containment_margin
from safecorridor.manager import IntersectionManager, build_danger_set, inflate_xy


def deepest(corridor, t):
    """The most interior node of the corridor at slice time ``t``."""
    vals = corridor.values[corridor.index_of(t)]
    idx = np.unravel_index(int(np.argmin(vals)), vals.shape)
    return np.array([corridor.grid.axes[d][i] for d, i in enumerate(idx)])


def _corridor_with(shadows, grid):
    vals = np.ones((len(shadows),) + grid.shape, np.float32)
    for k, s in enumerate(shadows):
        vals[k][s] = -1.0
    return TimeStateSet(grid, 0.0, 0.1, vals)


def test_inflation_matches_brute_force(small_manager):
    g = small_manager.grid
    rng = np.random.default_rng(1)
    for radius in (0.0, 0.15, 0.32):
        occ = rng.random(g.shape[:2]) < 0.05
        got = inflate_xy(occ, g.spacing[:2], radius) <= 0
        assert np.array_equal(got, brute_force_dilation(occ, g.spacing[:2], radius))


def test_danger_set_radius_edge_cases(small_manager):
    g = small_manager.grid
    occ = np.zeros(g.shape[:2], bool)
    occ[5, 7] = occ[6, 7] = True
    corridor = _corridor_with([(occ[:, :, None, None] & np.ones(g.shape, bool)), np.zeros(g.shape, bool)], g)
    zero = build_danger_set("r", corridor, 0.0)
    assert np.array_equal(zero.xy[0] <= 0, occ)
    assert (zero.xy[1] > 0).all()
    huge = build_danger_set("r", corridor, 10.0)
    assert (huge.xy[0] <= 0).all() and (huge.xy[1] > 0).all()
    assert huge.tss.values.shape == (2,) + g.shape


def test_first_vehicle_skips_pass2(small_manager):
    r = small_manager.reserve("a", "left", (0.0, 0.5), "right", 1.0)
    assert r.passes.phi2 is r.passes.phi1
    assert r.timings["pass2"] == 0.0
    assert r.rank == 1 and r.reservation_id == "res-0001" and r.status == "active"


def test_fcfs_ranks_follow_admission_order(small_manager):
    late = small_manager.reserve("late", "left", (1.0, 1.5), "right", 1.0)
    early = small_manager.reserve("early", "right", (0.0, 0.5), "left", 1.0)
    assert late.rank < early.rank
    assert [r.vehicle_id for r in small_manager.active()] == ["late", "early"]


def test_admission_never_mutates_earlier_corridors(small_manager):
    first = small_manager.reserve("a", "bottom", (0.0, 0.5), "top", 1.0)
    before = first.corridor.values.tobytes()
    second = small_manager.reserve("b", "left", (0.5, 1.0), "right", 1.0)
    assert small_manager.get(first.reservation_id).corridor.values.tobytes() == before
    # separation: the second corridor avoids the first one's danger set
    both = np.maximum(second.corridor.values, first.danger.tss.values)
    assert both.min() > -small_manager.grid.eps_empty
    assert second.passes.danger_window is not None


def test_release_semantics(small_manager, tmp_path):
    m = small_manager
    m.archive_dir = tmp_path
    a = m.reserve("a", "bottom", (0.0, 0.5), "top", 1.0)
    b = m.reserve("b", "left", (0.5, 1.0), "right", 1.0)
    m.release(a.reservation_id)
    m.release(a.reservation_id)
    assert m.get(a.reservation_id).status == "released"
    assert (tmp_path / f"{a.reservation_id}.tss").exists()
    assert [r.reservation_id for r in m.active()] == [b.reservation_id]
    with pytest.raises(UnknownReservation):
        m.release("res-9999")
    with pytest.raises(UnknownReservation):
        m.query_limits(a.reservation_id, (0, 0, 0, 0.3), 0.0, 1.0)
    # the released corridor is untouched
    assert m.get(a.reservation_id).corridor is a.corridor


def test_release_then_rereserve_is_no_smaller(small_manager):
    m = small_manager
    a = m.reserve("a", "bottom", (0.0, 0.5), "top", 1.0)
    b = m.reserve("b", "left", (0.5, 1.0), "right", 1.0)
    m.release(a.reservation_id)
    m.release(b.reservation_id)
    again = m.reserve("b2", "left", (0.5, 1.0), "right", 1.0)
    assert again.exit_window[0] <= b.exit_window[0] + 1e-9
    if np.allclose(again.exit_window, b.exit_window):
        assert containment_margin(again.corridor, b.corridor) <= 1e-6
    # with the blocker gone Pass 2 is Pass 1 again and contains the old Pass 2
    assert containment_margin(again.passes.phi2, b.passes.phi2) <= 1e-6


def test_request_errors(small_manager):
    with pytest.raises(UnknownRoute):
        small_manager.reserve("a", "north", (0.0, 0.5), "top", 1.0)
    with pytest.raises(HorizonExceeded):
        small_manager.reserve("a", "left", (7.5, 8.5), "right", 1.0)
    with pytest.raises(HorizonExceeded):
        small_manager.reserve("a", "left", (-1.0, 0.5), "right", 1.0)
    with pytest.raises(UnknownReservation):
        small_manager.get("nope")


def test_query_limits_in_and_after_the_corridor(perpendicular):
    m = perpendicular.manager
    for o in perpendicular.granted():
        r = o.reservation
        t0 = r.entry_window[0]
        z = deepest(r.corridor, t0)
        assert m.query_limits(r.reservation_id, z, 0.0, t0).feasible
        after = r.exit_window[1] + m.solver.dt
        assert not m.query_limits(r.reservation_id, z, 0.0, after).feasible


def test_limits_queries_run_during_admissions(small_manager):
    m = small_manager
    r = m.reserve("a", "left", (0.0, 0.5), "right", 1.0)
    z = deepest(r.corridor, 1.0)
    errors = []
    th = threading.Thread(target=lambda: m.reserve("b", "right", (1.0, 1.5), "left", 1.0))
    th.start()
    while th.is_alive():
        try:
            m.query_limits(r.reservation_id, z, 0.0, 1.0)
        except Exception as exc:  # pragma: no cover - reported below
            errors.append(exc)
            break
    th.join()
    assert not errors and len(m.active()) == 2


def test_default_manager_settings():
    m = IntersectionManager()
    assert m.grid.shape == (31, 31, 25, 7) and m.n_slices == 121
    assert m.footprint_radius == 0.15 and m.scheduling_horizon == 15.0
