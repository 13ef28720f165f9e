from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from safecorridor.config import bundled, load_config  # noqa: E402
from safecorridor.scenario import run_scenario  # noqa: E402

SCENARIOS = ("perpendicular", "scenario1", "scenario2", "scenario3")


@pytest.fixture(scope="session")
def run_bundled(tmp_path_factory):
    """Run a bundled scenario once per session (with outputs); later calls reuse it."""
    cache = {}

    def run(name):
        if name not in cache:
            path = tmp_path_factory.mktemp(f"{name}-a")
            cache[name] = run_scenario(load_config(bundled(name)), path)
            cache[name].out_dir = path
        return cache[name]

    return run


@pytest.fixture(scope="session")
def scenario_runs(run_bundled):
    """Every bundled scenario, keyed by name."""
    return {name: run_bundled(name) for name in SCENARIOS}


@pytest.fixture(scope="session")
def perpendicular(run_bundled):
    return run_bundled("perpendicular")


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one verdict line per acceptance criterion; printed in the terminal summary."""

    def record(n: int, ok: bool, detail: str) -> bool:
        _CRITERIA[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[n])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])


SMALL_SHAPE = (21, 21, 12, 5)


@pytest.fixture
def small_manager():
    """Manager on a coarse grid with a short horizon, for fast module tests."""
    from safecorridor.grid import StateGrid
    from safecorridor.manager import IntersectionManager, SolverConfig

    return IntersectionManager(grid=StateGrid.vehicle(shape=SMALL_SHAPE), solver=SolverConfig(horizon=8.0))
