"""Shared helpers for the experiment runners."""

from __future__ import annotations

import sys
from pathlib import Path

TESTS = Path(__file__).resolve().parents[1] / "tests"
SCENARIOS = ("perpendicular", "scenario1", "scenario2", "scenario3")


def use_test_oracles() -> None:
    """Make ``tests/oracles.py`` and the acceptance helpers importable."""
    if str(TESTS) not in sys.path:
        sys.path.insert(0, str(TESTS))
