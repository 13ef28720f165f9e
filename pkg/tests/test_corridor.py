from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import exit_window_by_enumeration
from safecorridor.corridor import (
    EntryExitSpec,
    Pass1Table,
    danger_window,
    earliest_window,
    exit_occupancy,
    lattice,
    pass3_entry,
    pass4_exit,
    route_sets,
    run_passes,
    select_exit_window,
)
from safecorridor.errors import EntryInfeasible, ExitInfeasible
from safecorridor.grid import LevelSetField, StateGrid, TimeStateSet, containment_margin


def test_lattice():
    assert lattice(12.0, 0.1) == 121
    with pytest.raises(ValueError):
        lattice(12.05, 0.1)


@given(st.lists(st.booleans(), min_size=1, max_size=60), st.integers(1, 20))
def test_earliest_window_matches_enumeration(flags, m):
    dt = 0.1
    times = dt * np.arange(len(flags))
    got = earliest_window(times, np.array(flags), m * dt, dt)
    want = exit_window_by_enumeration(times, flags, m * dt, dt)
    assert (got is None and want is None) or np.allclose(got, want)


def test_earliest_window_examples():
    t = 0.1 * np.arange(10)
    flags = np.array([0, 1, 1, 0, 1, 1, 1, 1, 0, 0], bool)
    assert np.allclose(earliest_window(t, flags, 0.2, 0.1), (0.4, 0.6))
    assert np.allclose(earliest_window(t, flags, 0.1, 0.1), (0.1, 0.2))
    assert earliest_window(t, flags, 0.4, 0.1) is None


def _flag_set(flags):
    grid = StateGrid(((0.0, 1.0), (0.0, 1.0)), (5, 5), (False, False))
    vals = np.ones((len(flags),) + grid.shape, np.float32)
    vals[np.array(flags, bool), 3, 2] = -1.0
    exit_region = LevelSetField(grid, np.where(grid.mesh()[0] >= 0.6, -1.0, 1.0) * np.ones(grid.shape))
    return TimeStateSet(grid, 0.0, 0.1, vals), exit_region


def test_select_exit_window_errors():
    phi3, exit_region = _flag_set([0, 0, 1, 1, 0])
    assert np.allclose(select_exit_window(phi3, exit_region, 0.1), (0.2, 0.3))
    with pytest.raises(ExitInfeasible):
        select_exit_window(phi3, exit_region, 0.2)
    with pytest.raises(ValueError):
        select_exit_window(phi3, exit_region, 0.0)
    with pytest.raises(ValueError):
        select_exit_window(phi3, exit_region, 1.0)
    assert list(exit_occupancy(phi3, exit_region) < 0) == [False, False, True, True, False]


def test_danger_window_widens_by_one_slice():
    grid = StateGrid(((0.0, 1.0), (0.0, 1.0)), (5, 5), (False, False))
    vals = np.ones((10,) + grid.shape, np.float32)
    vals[3:5, 1, 1] = -1.0
    assert np.allclose(danger_window(TimeStateSet(grid, 0.0, 0.1, vals)), (0.2, 0.5))
    assert danger_window(None) is None
    assert danger_window(TimeStateSet(grid, 0.0, 0.1, np.ones_like(vals))) is None


def test_entry_exit_spec_validation(small_manager):
    m = small_manager
    entry = m.layout.entry_region(m.grid, "left")
    exit_region = m.layout.exit_region(m.grid, "right", 0.6)
    with pytest.raises(ValueError):
        EntryExitSpec(entry, (1.0, 0.5), exit_region, 2.0)
    with pytest.raises(ValueError):
        EntryExitSpec(entry, (0.0, 0.5), exit_region, 0.0)
    with pytest.raises(ValueError):
        EntryExitSpec(LevelSetField.constant(m.grid, 1.0), (0.0, 0.5), exit_region, 2.0)


def test_pass1_table_disk_round_trip(tmp_path, small_manager):
    m = small_manager
    key = Pass1Table.key("left", "right", m.grid, m.model, m.layout, 8.0, 0.1)
    table = Pass1Table(tmp_path)
    assert table.get(key) is None
    phi1 = m.pass1("left", "right")
    table.put(key, phi1)
    fresh = Pass1Table(tmp_path)
    back = fresh.get(key)
    assert back is not None and np.array_equal(back.values, phi1.values)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest[0]["key"] == key
    assert fresh.get({**key, "horizon": 9.0}) is None


def test_pass1_is_cached_in_memory(small_manager):
    assert small_manager.pass1("left", "right") is small_manager.pass1("left", "right")


def _spec(m, entry, exit, window=(0.0, 0.5), delta=1.0):
    return EntryExitSpec(
        m.layout.entry_region(m.grid, entry), window, m.layout.exit_region(m.grid, exit, m.model.speed_limit), delta
    )


def test_passes_are_nested(small_manager):
    m = small_manager
    goal, cons = route_sets(m.layout, m.grid, m.model, "left", "right", 8.0, 0.1)
    res = run_passes(m.model, m.pass1("left", "right"), goal, cons, _spec(m, "left", "right"))
    for inner, outer in ((res.phi4, res.phi3), (res.phi3, res.phi2), (res.phi2, res.phi1), (res.phi1, cons)):
        assert containment_margin(outer, inner) <= 1e-6
    assert res.phi2 is res.phi1  # no dangers
    ta, tb = res.exit_window
    assert tb - ta == pytest.approx(1.0)
    # the corridor meets the exit region at every slice of the exit window
    occ = exit_occupancy(res.phi4.restrict(ta, tb), _spec(m, "left", "right").exit_region)
    assert np.all(occ <= -m.grid.eps_empty)
    assert set(res.timings) == {"pass2", "pass3", "pass4", "total"}


def test_pass3_margin_outer_approximates(small_manager):
    m = small_manager
    phi2 = m.pass1("left", "right")
    spec = _spec(m, "left", "right")
    tight = pass3_entry(m.model, phi2, spec, margin=0.0)
    loose = pass3_entry(m.model, phi2, spec)
    assert containment_margin(loose, tight) <= 0.0
    assert (loose.values <= 0).sum() >= (tight.values <= 0).sum()


def test_pass3_rejects_entry_outside_pass2(small_manager):
    m = small_manager
    with pytest.raises(EntryInfeasible):
        pass3_entry(m.model, m.pass1("left", "right"), _spec(m, "top", "right"))
    with pytest.raises(EntryInfeasible):
        pass3_entry(m.model, m.pass1("left", "right"), _spec(m, "left", "right", window=(8.01, 8.09)))


def test_pass4_rejects_bad_windows(small_manager):
    m = small_manager
    phi2 = m.pass1("left", "right")
    spec = _spec(m, "left", "right")
    phi3 = pass3_entry(m.model, phi2, spec)
    with pytest.raises(ExitInfeasible):
        pass4_exit(m.model, phi3, (7.5, 9.5), spec.exit_region)
    with pytest.raises(ExitInfeasible):
        pass4_exit(m.model, phi3, (0.0, 1.0), spec.exit_region)


def test_pass4_phi2_form_is_inside_pass3(small_manager):
    m = small_manager
    phi2 = m.pass1("left", "right")
    spec = _spec(m, "left", "right")
    phi3 = pass3_entry(m.model, phi2, spec)
    win = select_exit_window(phi3, spec.exit_region, spec.delta)
    a = pass4_exit(m.model, phi3, win, spec.exit_region)
    b = pass4_exit(m.model, phi3, win, spec.exit_region, phi2=phi2)
    assert containment_margin(phi3, a) <= 0 and containment_margin(phi3, b) <= 0
    assert not a.is_empty() and not b.is_empty()
