"""Backward and forward reachable tubes on a grid.

The value function is advanced with first-order one-sided differences. The
default scheme upwinds each control's flow direction separately and takes
the extreme over controls, which is monotone under the CFL bound and far less
dissipative than a global Lax-Friedrichs Hamiltonian (kept as ``scheme="lf"``
for comparison). After every step the goal (or
initial set) is folded in with a pointwise min and the constraint with a
pointwise max, so the constraint always wins over goal capture.

Between two stored slices the solver takes ``n_sub`` CFL-limited substeps.
Inside an interval it uses the larger of the two bracketing constraint and
goal slices, i.e. the smaller of the two sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleModel
from .errors import CflViolation, GridMismatch, SolverError, TimeRangeMismatch
from .grid import EMPTY_VALUE, STORE_DTYPE, LevelSetField, StateGrid, TimeStateSet

CFL = 0.8


@dataclass(frozen=True, eq=False)
class SolveRequest:
    direction: str  # "backward" or "forward"
    target: TimeStateSet  # goal for backward solves, initial set for forward solves
    constraint: TimeStateSet
    horizon: float | None = None
    span: tuple[float, float] | None = None
    terminal: LevelSetField | None = None
    cfl: float = CFL
    substep: float | None = None
    scheme: str = "upwind"


def cfl_substep(model, grid: StateGrid, cfl: float = CFL) -> float:
    """Largest stable explicit step for ``model`` on ``grid``."""
    alpha = model.max_speed_over_grid(grid)
    rate = float(np.sum(alpha / grid.spacing))
    return math.inf if rate == 0 else cfl / rate


def _one_sided(V, d, h, periodic):
    if periodic:
        fwd = (np.roll(V, -1, axis=d) - V) / h
        bwd = (V - np.roll(V, 1, axis=d)) / h
        return fwd, bwd
    # zero-gradient ghost nodes at the edges keep the update monotone
    diff = np.diff(V, axis=d) / h
    edge = np.zeros_like(np.take(diff, [0], axis=d))
    return np.concatenate([diff, edge], axis=d), np.concatenate([edge, diff], axis=d)


class _Stepper:
    """Advance a value array by one substep and apply the masks."""

    def __init__(self, model, grid: StateGrid, backward: bool, backend: str = "auto", scheme: str = "upwind"):
        if scheme not in ("upwind", "lf"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self.model = model
        self.grid = grid
        self.backward = backward
        self.alpha = np.asarray(model.max_speed_over_grid(grid), dtype=float)
        self.h = grid.spacing
        self.mesh = grid.mesh()
        fast_ok = isinstance(model, VehicleModel) and grid.periodic == (False, False, True, False)
        if backend == "auto":
            backend = "numba" if fast_ok else "numpy"
        if backend == "numba" and not fast_ok:
            raise ValueError("the compiled kernel only supports the bicycle model on its 4-D grid")
        self.backend = backend
        if backend == "numba":
            from ._kernels import lf_step_bicycle, upwind_step_bicycle

            th = grid.axes[2]
            if scheme == "lf":
                self._kernel, lead = lf_step_bicycle, (1.0 / self.h, self.alpha)
            else:
                self._kernel, lead = upwind_step_bicycle, (1.0 / self.h,)
            self._args = lead + (
                np.cos(th),
                np.sin(th),
                np.ascontiguousarray(grid.axes[3]),
                math.tan(model.steer_bounds[0]) / model.wheel_base,
                math.tan(model.steer_bounds[1]) / model.wheel_base,
                model.accel_bounds[0],
                model.accel_bounds[1],
            )
            self._buf = np.empty(grid.shape)

    def __call__(self, V, dtau, goal=None, cons=None):
        if self.backend == "numba":
            out = self._buf
            self._kernel(
                V, out, dtau, *self._args, self.backward,
                V if goal is None else goal, goal is not None,
                V if cons is None else cons, cons is not None,
            )
            self._buf = V
            return out
        diffs = [_one_sided(V, d, self.h[d], self.grid.periodic[d]) for d in range(self.grid.ndim)]
        if self.scheme == "upwind":
            rate = self.model.upwind_rate(self.mesh, [d[0] for d in diffs], [d[1] for d in diffs], self.backward)
            new = V + dtau * rate if self.backward else V - dtau * rate
        else:
            p = [0.5 * (fwd + bwd) for fwd, bwd in diffs]
            diss = sum(self.alpha[d] * 0.5 * (fwd - bwd) for d, (fwd, bwd) in enumerate(diffs))
            ham = self.model.hamiltonian(self.mesh, p, "min" if self.backward else "max")
            new = V + dtau * ((ham if self.backward else -ham) + diss)
        if goal is not None:
            new = np.minimum(new, goal)
        if cons is not None:
            new = np.maximum(new, cons)
        return new


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _round(V):
    return V.astype(STORE_DTYPE).astype(np.float64)


def solve(model, req: SolveRequest, backend: str = "auto") -> TimeStateSet:
    if req.direction not in ("backward", "forward"):
        raise ValueError(f"unknown direction {req.direction!r}")
    cons, tgt = req.constraint, req.target
    grid = cons.grid
    if tgt.grid != grid or (req.terminal is not None and req.terminal.grid != grid):
        raise GridMismatch("target, constraint and terminal must share one grid")
    if abs(tgt.dt - cons.dt) > 1e-9:
        raise TimeRangeMismatch("target and constraint use different time steps")
    if req.horizon is not None:
        if not req.horizon > 0:
            raise ValueError("horizon must be positive")
        n = int(math.floor(req.horizon / cons.dt + 1e-9)) + 1
        cons = TimeStateSet(grid, cons.t0, cons.dt, cons.values[: min(n, len(cons))])
    off_f = (tgt.t0 - cons.t0) / cons.dt
    off = int(round(off_f))
    if abs(off_f - off) > 1e-6:
        raise TimeRangeMismatch("target slices are not on the constraint's time lattice")

    K, dt = len(cons), cons.dt
    k_lo, k_hi = 0, K - 1
    if req.span is not None:
        k_lo, k_hi = cons.index_of(req.span[0]), cons.index_of(req.span[1])
        if k_hi < k_lo:
            raise TimeRangeMismatch("span is reversed")

    dt_cfl = cfl_substep(model, grid, req.cfl)
    if req.substep is not None:
        if req.substep > dt_cfl * (1 + 1e-12):
            raise CflViolation(f"substep {req.substep} exceeds the CFL bound {dt_cfl:.5f}")
        n_sub = max(1, math.ceil(dt / req.substep - 1e-9))
    else:
        n_sub = max(1, math.ceil(dt / dt_cfl - 1e-9))
    h = dt / n_sub

    def target_at(k):
        j = k - off
        return tgt.values[j] if 0 <= j < len(tgt) else None

    backward = req.direction == "backward"
    step = _Stepper(model, grid, backward, backend, req.scheme)
    out = np.empty((K,) + grid.shape, dtype=STORE_DTYPE)
    for k in list(range(0, k_lo)) + list(range(k_hi + 1, K)):
        out[k] = np.maximum(EMPTY_VALUE, cons.values[k])

    k_start = k_hi if backward else k_lo
    if req.terminal is not None:
        V = _f64(req.terminal.values)
    else:
        g = target_at(k_start)
        V = np.full(grid.shape, EMPTY_VALUE) if g is None else np.minimum(EMPTY_VALUE, _f64(g))
    V = _round(np.maximum(V, cons.values[k_start]))
    out[k_start] = V

    order = range(k_hi - 1, k_lo - 1, -1) if backward else range(k_lo + 1, k_hi + 1)
    for k in order:
        k_prev = k + 1 if backward else k - 1
        c_mid = _f64(np.maximum(cons.values[k], cons.values[k_prev]))
        c_end = _f64(cons.values[k])
        g_prev, g_end = target_at(k_prev), target_at(k)
        g_mid = None if g_prev is None or g_end is None else _f64(np.maximum(g_prev, g_end))
        g_end = None if g_end is None else _f64(g_end)
        V = V.copy()
        for s in range(n_sub):
            last = s == n_sub - 1
            V = step(V, h, g_end if last else g_mid, c_end if last else c_mid)
        if not np.isfinite(V).all():
            raise SolverError(f"non-finite values at t={cons.times[k]:.3f}")
        V = _round(V)
        out[k] = V
    return TimeStateSet(grid, cons.t0, dt, out)


def backward_tube(
    model, goal: TimeStateSet, constraint: TimeStateSet, horizon: float | None = None, **kw
) -> TimeStateSet:
    """States from which some input reaches ``goal`` while staying in ``constraint``.

    The result lives on the constraint's time lattice. Keyword arguments
    (``span``, ``terminal``, ``cfl``, ``substep``, ``scheme``, ``backend``) are forwarded.
    ``span=(t_a, t_b)`` restricts the computation to that interval; slices
    outside it are reported empty. ``terminal`` replaces the start value at
    ``t_b``.
    """
    backend = kw.pop("backend", "auto")
    return solve(model, SolveRequest("backward", goal, constraint, horizon, **kw), backend)


def forward_tube(
    model, initial: TimeStateSet, constraint: TimeStateSet, horizon: float | None = None, **kw
) -> TimeStateSet:
    """States some trajectory from ``initial`` can occupy while staying in ``constraint``."""
    backend = kw.pop("backend", "auto")
    return solve(model, SolveRequest("forward", initial, constraint, horizon, **kw), backend)
