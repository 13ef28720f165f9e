"""Least-restrictive acceleration limits that keep a vehicle inside its corridor.

A first-order expansion of the corridor value V over one step of length
``delta_t`` gives the half-space ``a + b * accel <= 0`` with

    a = V + dV/dt * delta_t + grad V . f(z, steer, 0) * delta_t
    b = dV/dv * delta_t

because acceleration enters the dynamics only through the speed channel.
Spatial derivatives are central differences of interpolated values at half
a grid cell (one-sided at the grid boundary); the time derivative is the
forward difference between the two slices around ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfCorridorTime
from .grid import TimeStateSet, interpolate_many

EPS_B = 1e-9


@dataclass(frozen=True)
class HalfSpaceLimit:
    a: float
    b: float
    feasible: bool
    accel_interval: tuple[float, float] | None
    value: float = float("nan")  # corridor value at the query

    @property
    def accel_min(self) -> float:
        return self.accel_interval[0] if self.accel_interval else float("nan")

    @property
    def accel_max(self) -> float:
        return self.accel_interval[1] if self.accel_interval else float("nan")

    def saturate(self, accel: float) -> float:
        """Clip ``accel`` into the admissible interval."""
        if self.accel_interval is None:
            raise ValueError("no admissible acceleration")
        lo, hi = self.accel_interval
        return min(max(accel, lo), hi)


def solve_half_space(a: float, b: float, accel_bounds: tuple[float, float], eps_b: float = EPS_B):
    """Interval of accelerations in ``accel_bounds`` with ``a + b*accel <= 0`` (or None)."""
    lo, hi = accel_bounds
    if abs(b) <= eps_b:
        return (lo, hi) if a <= 0 else None
    root = -a / b
    if b > 0:
        hi = min(hi, root)
    else:
        lo = max(lo, root)
    return (lo, hi) if lo <= hi else None


def _stencil(tss: TimeStateSet, z: np.ndarray):
    """Query points: z, then z -/+ half a cell per dimension, clipped to the box."""
    grid = tss.grid
    half = 0.5 * grid.spacing
    pts = [z]
    steps = []
    for d in range(grid.ndim):
        lo, hi = z.copy(), z.copy()
        lo[d] -= half[d]
        hi[d] += half[d]
        if not grid.periodic[d]:
            lo[d] = max(lo[d], grid.bounds[d][0])
            hi[d] = min(hi[d], grid.bounds[d][1])
        steps.append(hi[d] - lo[d])
        pts += [lo, hi]
    return np.array(pts), np.array(steps)


@dataclass(frozen=True)
class LocalExpansion:
    """Corridor value, spatial gradient and time derivative at one time-state."""

    value: float
    grad: np.ndarray
    dvdt: float


def local_expansion(corridor: TimeStateSet, z, t: float) -> LocalExpansion:
    if not corridor.covers(t):
        raise OutOfCorridorTime(f"t={t} outside [{corridor.t0}, {corridor.t_end}]")
    grid = corridor.grid
    z = grid.wrap(np.asarray(z, dtype=float))
    k0, k1, frac = corridor.bracket(t)
    # slice pair for the time derivative; at the last slice look one step back
    if k0 == k1:
        k0, frac = max(k1 - 1, 0), 1.0
    pts, steps = _stencil(corridor, z)
    grid.check_in_bounds(pts[:1])
    v0 = interpolate_many(corridor.values[k0], grid, pts)
    v1 = interpolate_many(corridor.values[k1], grid, pts)
    vt = (1.0 - frac) * v0 + frac * v1
    # the expansion is anchored on the time-linear interpolant that D_t extrapolates;
    # the max-of-slices membership rule would reject a vehicle riding a thin moving set
    grad = np.array([(vt[2 + 2 * d] - vt[1 + 2 * d]) / steps[d] for d in range(grid.ndim)])
    dvdt = 0.0 if k0 == k1 else float(v1[0] - v0[0]) / corridor.dt
    return LocalExpansion(float(vt[0]), grad, dvdt)


def driving_limits(
    corridor: TimeStateSet, model, z, steer: float, t: float, delta_t: float | None = None
) -> HalfSpaceLimit:
    """Admissible acceleration interval at state ``z`` and time ``t`` for a given steering angle.

    Queries outside the corridor (interpolated V > 0) are reported infeasible.
    """
    model.check_control((steer, 0.0))
    delta_t = corridor.dt if delta_t is None else float(delta_t)
    loc = local_expansion(corridor, z, t)
    f = model.flow(corridor.grid.wrap(np.asarray(z, dtype=float)), (steer, 0.0))
    a = loc.value + loc.dvdt * delta_t + float(loc.grad @ f) * delta_t
    b = float(loc.grad[-1]) * delta_t
    if loc.value > 0.0:
        return HalfSpaceLimit(a, b, False, None, loc.value)
    interval = solve_half_space(a, b, model.accel_bounds)
    return HalfSpaceLimit(a, b, interval is not None, interval, loc.value)


def limits_profile(
    corridor: TimeStateSet, model, x: float, y: float, theta: float, t: float, v_samples, steer: float = 0.0,
    delta_t: float | None = None,
) -> list[HalfSpaceLimit]:
    """``driving_limits`` over a speed sweep at a fixed position and heading."""
    return [driving_limits(corridor, model, (x, y, theta, v), steer, t, delta_t) for v in v_samples]


def admissible_region(profile: list[HalfSpaceLimit]) -> np.ndarray:
    """(n, 2) array of [accel_min, accel_max] rows, NaN where infeasible."""
    return np.array([[p.accel_min, p.accel_max] for p in profile], dtype=float)


def full_interval(lim: HalfSpaceLimit, accel_bounds, tol: float = 1e-12) -> bool:
    if not lim.feasible:
        return False
    lo, hi = lim.accel_interval
    return math.isclose(lo, accel_bounds[0], abs_tol=tol) and math.isclose(hi, accel_bounds[1], abs_tol=tol)
