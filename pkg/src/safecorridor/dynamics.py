"""Vehicle dynamics and the Hamiltonian terms used by the level-set solver.

Two models share one small interface (``hamiltonian``, ``max_speed_over_grid``):
the reduced kinematic bicycle on (x, y, theta, v) and a 1-D double integrator
on (x, v) that is small enough to check against brute-force reachability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ControlOutOfBounds
from .grid import StateGrid

_CTRL_TOL = 1e-12


def _interval(pair) -> tuple[float, float]:
    lo, hi = float(pair[0]), float(pair[1])
    if hi < lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return lo, hi


def upwind_term(f_lo, f_hi, dp, dm, backward: bool):
    """Extreme over f in [f_lo, f_hi] of the upwinded product f * D.

    Backward solves take the min of f * (dp if f > 0 else dm); forward solves
    take the max of f * (dm if f > 0 else dp). The map is piecewise linear with
    a kink at f = 0, so the endpoints and zero are the only candidates.
    """
    if backward:
        up, down, pick = dp, dm, np.minimum
    else:
        up, down, pick = dm, dp, np.maximum

    def at(f):
        return np.maximum(f, 0.0) * up + np.minimum(f, 0.0) * down

    out = pick(at(f_lo), at(f_hi))
    straddles = (np.asarray(f_lo) <= 0.0) & (np.asarray(f_hi) >= 0.0)
    return np.where(straddles, pick(out, 0.0), out)


def _affine_extremes(coef, lo, hi):
    """min and max of coef * u over u in [lo, hi]."""
    a, b = coef * lo, coef * hi
    return np.minimum(a, b), np.maximum(a, b)


@dataclass(frozen=True)
class VehicleModel:
    """Kinematic bicycle with state (x, y, theta, v) and input (steer, accel)."""

    wheel_base: float = 0.32
    steer_bounds: tuple[float, float] = (-math.pi / 5, math.pi / 5)
    accel_bounds: tuple[float, float] = (-0.5, 0.5)
    speed_limit: float = 0.6

    def __post_init__(self):
        object.__setattr__(self, "steer_bounds", _interval(self.steer_bounds))
        object.__setattr__(self, "accel_bounds", _interval(self.accel_bounds))
        if not self.wheel_base > 0:
            raise ValueError("wheel_base must be positive")
        if max(abs(s) for s in self.steer_bounds) >= math.pi / 2:
            raise ValueError("steering bound must stay below pi/2")
        lo, hi = self.accel_bounds
        if not lo <= 0.0 <= hi:
            raise ValueError("accel_bounds must contain 0")
        if not self.speed_limit > 0:
            raise ValueError("speed_limit must be positive")

    ndim = 4

    def digest(self) -> str:
        return f"L{self.wheel_base!r}-d{self.steer_bounds!r}-a{self.accel_bounds!r}-s{self.speed_limit!r}"

    def check_control(self, u) -> None:
        steer, accel = float(u[0]), float(u[1])
        for val, (lo, hi), name in ((steer, self.steer_bounds, "steer"), (accel, self.accel_bounds, "accel")):
            if not lo - _CTRL_TOL <= val <= hi + _CTRL_TOL:
                raise ControlOutOfBounds(f"{name}={val} outside [{lo}, {hi}]")

    def flow(self, z, u) -> np.ndarray:
        self.check_control(u)
        x, y, th, v = (float(c) for c in z)
        steer, accel = float(u[0]), float(u[1])
        return np.array([v * math.cos(th), v * math.sin(th), v * math.tan(steer) / self.wheel_base, accel])

    def drift(self, z, steer: float) -> np.ndarray:
        """The f(z, u) part with zero acceleration (steering enters the drift)."""
        return self.flow(z, (steer, 0.0))

    def hamiltonian_extremes(self, z, p) -> tuple[float, float]:
        """Closed-form (min_u, max_u) of p . zdot over the admissible inputs."""
        _, _, th, v = (float(c) for c in z)
        px, py, pth, pv = (float(c) for c in p)
        base = px * v * math.cos(th) + py * v * math.sin(th)
        k = pth * v / self.wheel_base
        s_lo, s_hi = _affine_extremes(k, math.tan(self.steer_bounds[0]), math.tan(self.steer_bounds[1]))
        a_lo, a_hi = _affine_extremes(pv, *self.accel_bounds)
        return float(base + s_lo + a_lo), float(base + s_hi + a_hi)

    def hamiltonian(self, mesh, p, mode: str) -> np.ndarray:
        """Grid-wide min (``mode="min"``) or max of p . zdot over the inputs."""
        _, _, th, v = mesh
        tlo, thi = math.tan(self.steer_bounds[0]), math.tan(self.steer_bounds[1])
        ham = p[0] * (v * np.cos(th)) + p[1] * (v * np.sin(th))
        k = p[2] * (v / self.wheel_base)
        s = _affine_extremes(k, tlo, thi)
        a = _affine_extremes(p[3], *self.accel_bounds)
        pick = 0 if mode == "min" else 1
        return ham + s[pick] + a[pick]

    def upwind_rate(self, mesh, dp, dm, backward: bool) -> np.ndarray:
        """Per-control upwinded Hamiltonian (see ``upwind_term``)."""
        _, _, th, v = mesh
        rate = upwind_term(v * np.cos(th), v * np.cos(th), dp[0], dm[0], backward)
        rate = rate + upwind_term(v * np.sin(th), v * np.sin(th), dp[1], dm[1], backward)
        k = v / self.wheel_base
        s = (k * math.tan(self.steer_bounds[0]), k * math.tan(self.steer_bounds[1]))
        rate = rate + upwind_term(np.minimum(*s), np.maximum(*s), dp[2], dm[2], backward)
        return rate + upwind_term(*self.accel_bounds, dp[3], dm[3], backward)

    def max_speed_over_grid(self, grid: StateGrid) -> np.ndarray:
        """Per-dimension bound on |zdot_d| over grid nodes and admissible inputs."""
        vmax = max(abs(grid.bounds[3][0]), abs(grid.bounds[3][1]))
        tmax = max(abs(math.tan(s)) for s in self.steer_bounds)
        amax = max(abs(a) for a in self.accel_bounds)
        return np.array([vmax, vmax, vmax * tmax / self.wheel_base, amax])


@dataclass(frozen=True)
class DoubleIntegrator:
    """xdot = v, vdot = a with a in ``accel_bounds``; used for oracle checks."""

    accel_bounds: tuple[float, float] = (-0.5, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "accel_bounds", _interval(self.accel_bounds))

    ndim = 2

    def digest(self) -> str:
        return f"di-a{self.accel_bounds!r}"

    def flow(self, z, u) -> np.ndarray:
        lo, hi = self.accel_bounds
        a = float(u[0]) if np.ndim(u) else float(u)
        if not lo - _CTRL_TOL <= a <= hi + _CTRL_TOL:
            raise ControlOutOfBounds(f"accel={a} outside [{lo}, {hi}]")
        return np.array([float(z[1]), a])

    def hamiltonian_extremes(self, z, p) -> tuple[float, float]:
        lo, hi = _affine_extremes(float(p[1]), *self.accel_bounds)
        base = float(p[0]) * float(z[1])
        return float(base + lo), float(base + hi)

    def hamiltonian(self, mesh, p, mode: str) -> np.ndarray:
        _, v = mesh
        a = _affine_extremes(p[1], *self.accel_bounds)
        return p[0] * v + a[0 if mode == "min" else 1]

    def upwind_rate(self, mesh, dp, dm, backward: bool) -> np.ndarray:
        _, v = mesh
        rate = upwind_term(v, v, dp[0], dm[0], backward)
        return rate + upwind_term(*self.accel_bounds, dp[1], dm[1], backward)

    def max_speed_over_grid(self, grid: StateGrid) -> np.ndarray:
        vmax = max(abs(grid.bounds[1][0]), abs(grid.bounds[1][1]))
        return np.array([vmax, max(abs(a) for a in self.accel_bounds)])
