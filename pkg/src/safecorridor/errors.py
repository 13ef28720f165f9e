"""Exception types raised across the package.

Each maps to a stable wire code (see ``service.py``) via its ``code`` attribute.
"""

from __future__ import annotations


class CorridorError(Exception):
    code = "error"


class OutOfBounds(CorridorError, ValueError):
    code = "out_of_bounds"


class GridMismatch(CorridorError, ValueError):
    code = "grid_mismatch"


class TimeRangeMismatch(CorridorError, ValueError):
    code = "time_range_mismatch"


class ControlOutOfBounds(CorridorError, ValueError):
    code = "control_out_of_bounds"


class CflViolation(CorridorError, ValueError):
    code = "cfl_violation"


class SolverError(CorridorError, RuntimeError):
    code = "solver_error"


class UnboundProposition(CorridorError, KeyError):
    code = "unbound_proposition"


class UnsupportedPattern(CorridorError, ValueError):
    code = "unsupported_pattern"


class UnknownRoute(CorridorError, KeyError):
    code = "unknown_route"


class _MarginError(CorridorError):
    """Rejection that reports how far the offending set sits outside its container."""

    def __init__(self, message: str, margin: float = float("nan")):
        super().__init__(message)
        self.margin = float(margin)


class EntryInfeasible(_MarginError):
    code = "entry_infeasible"


class ExitInfeasible(_MarginError):
    code = "exit_infeasible"


class HorizonExceeded(CorridorError, ValueError):
    code = "horizon_exceeded"


class UnknownReservation(CorridorError, KeyError):
    code = "unknown_reservation"


class OutOfCorridorTime(CorridorError, ValueError):
    code = "out_of_corridor_time"


class InfeasibleAtStart(CorridorError, RuntimeError):
    code = "infeasible_at_start"


class ConfigError(CorridorError, ValueError):
    code = "config_error"


class CorruptFile(CorridorError, ValueError):
    code = "corrupt_file"
