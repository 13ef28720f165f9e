"""Discretized state space, level-set fields and time-state sets.

Sets are stored implicitly: a node belongs to the set iff its value is <= 0.
Union is a pointwise minimum, intersection a pointwise maximum and complement
a negation, so the set algebra is exact in floating point.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import CorruptFile, GridMismatch, OutOfBounds, TimeRangeMismatch

STORE_DTYPE = np.float32
# value used for "nothing here"; any positive number would do
EMPTY_VALUE = 1.0
_TIME_TOL = 1e-9


@dataclass(frozen=True)
class StateGrid:
    """Regular grid over a box, with optional periodic dimensions.

    Non-periodic dimensions include both endpoints. A periodic dimension is
    split into ``shape[d]`` equal intervals over ``[lower, upper)``.
    """

    bounds: tuple[tuple[float, float], ...] = (
        (-1.5, 1.5),
        (-1.5, 1.5),
        (-math.pi, math.pi),
        (0.0, 0.8),
    )
    shape: tuple[int, ...] = (31, 31, 25, 7)
    periodic: tuple[bool, ...] = (False, False, True, False)

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        shape = tuple(int(n) for n in self.shape)
        periodic = tuple(bool(p) for p in self.periodic)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "periodic", periodic)
        if not (len(bounds) == len(shape) == len(periodic)):
            raise ValueError("bounds, shape and periodic must have one entry per dimension")
        for (lo, hi), n in zip(bounds, shape):
            if not hi > lo:
                raise ValueError(f"empty interval [{lo}, {hi}]")
            if n < 3:
                raise ValueError("every dimension needs at least 3 nodes")

    @classmethod
    def vehicle(
        cls,
        bounds_x=(-1.5, 1.5),
        bounds_y=(-1.5, 1.5),
        bounds_theta=(-math.pi, math.pi),
        bounds_v=(0.0, 0.8),
        shape=(31, 31, 25, 7),
    ) -> "StateGrid":
        """The (x, y, theta, v) grid with periodic heading."""
        return cls((bounds_x, bounds_y, bounds_theta, bounds_v), tuple(shape), (False, False, True, False))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def spacing(self) -> np.ndarray:
        out = []
        for (lo, hi), n, per in zip(self.bounds, self.shape, self.periodic):
            out.append((hi - lo) / n if per else (hi - lo) / (n - 1))
        return np.array(out)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        out = []
        for (lo, hi), n, per in zip(self.bounds, self.shape, self.periodic):
            out.append(np.linspace(lo, hi, n, endpoint=not per))
        return tuple(out)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def eps_empty(self) -> float:
        """Sub-cell threshold below which a slice counts as empty."""
        return float(self.spacing.min()) / 10.0

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Open mesh: one broadcastable coordinate array per dimension."""
        out = []
        for d, ax in enumerate(self.axes):
            s = [1] * self.ndim
            s[d] = -1
            out.append(ax.reshape(s))
        return tuple(out)

    def digest(self) -> str:
        payload = json.dumps([self.bounds, self.shape, self.periodic]).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def wrap(self, z: np.ndarray) -> np.ndarray:
        """Wrap periodic coordinates into their base interval."""
        z = np.array(z, dtype=float, copy=True)
        for d, per in enumerate(self.periodic):
            if per:
                lo, hi = self.bounds[d]
                z[..., d] = lo + np.mod(z[..., d] - lo, hi - lo)
        return z

    def check_in_bounds(self, pts: np.ndarray) -> None:
        tol = 1e-9 * self.spacing
        for d, per in enumerate(self.periodic):
            if per:
                continue
            lo, hi = self.bounds[d]
            col = pts[..., d]
            if np.any(col < lo - tol[d]) or np.any(col > hi + tol[d]) or np.any(~np.isfinite(col)):
                raise OutOfBounds(f"coordinate {d} outside [{lo}, {hi}]")


def _readonly(a: np.ndarray) -> np.ndarray:
    if a.flags.writeable:
        a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LevelSetField:
    grid: StateGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise GridMismatch(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def constant(cls, grid: StateGrid, value: float) -> "LevelSetField":
        return cls(grid, np.broadcast_to(np.asarray(value, dtype=STORE_DTYPE), grid.shape))

    @classmethod
    def from_function(cls, grid: StateGrid, fn: Callable[..., np.ndarray]) -> "LevelSetField":
        v = np.broadcast_to(fn(*grid.mesh()), grid.shape).astype(STORE_DTYPE)
        return cls(grid, v)

    def is_empty(self, eps: float | None = None) -> bool:
        eps = self.grid.eps_empty if eps is None else eps
        return bool(self.values.min() > -eps)


@dataclass(frozen=True, eq=False)
class TimeStateSet:
    """Time-indexed level-set fields on a uniform time lattice ``t0 + k*dt``."""

    grid: StateGrid
    t0: float
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != self.grid.ndim + 1 or v.shape[1:] != self.grid.shape:
            raise GridMismatch(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if v.shape[0] < 1:
            raise ValueError("a time-state set needs at least one slice")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def constant_in_time(cls, fld: LevelSetField, t0: float, dt: float, n: int) -> "TimeStateSet":
        """Hold one field over ``n`` slices without copying it."""
        vals = np.broadcast_to(fld.values[None], (n,) + fld.grid.shape)
        return cls(fld.grid, t0, dt, vals)

    @classmethod
    def on_window(
        cls, fld: LevelSetField, window: Sequence[float], t0: float, dt: float
    ) -> "TimeStateSet":
        """``window x fld`` on the lattice ``t0 + k*dt``; covers every lattice time in the window."""
        ta, tb = float(window[0]), float(window[1])
        if tb < ta:
            raise ValueError("window end precedes start")
        k0 = math.ceil((ta - t0) / dt - _TIME_TOL)
        k1 = math.floor((tb - t0) / dt + _TIME_TOL)
        if k1 < k0:
            raise TimeRangeMismatch(f"window [{ta}, {tb}] contains no lattice time")
        return cls.constant_in_time(fld, t0 + k0 * dt, dt, k1 - k0 + 1)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self) - 1)

    def slice(self, k: int) -> LevelSetField:
        return LevelSetField(self.grid, self.values[k])

    def index_of(self, t: float) -> int:
        """Lattice index of time ``t``; raises unless ``t`` is on the lattice and in range."""
        s = (t - self.t0) / self.dt
        k = int(round(s))
        if abs(s - k) > 1e-6 or not 0 <= k < len(self):
            raise TimeRangeMismatch(f"t={t} is not a slice time of [{self.t0}, {self.t_end}]")
        return k

    def covers(self, t: float) -> bool:
        return self.t0 - _TIME_TOL <= t <= self.t_end + _TIME_TOL

    def bracket(self, t: float) -> tuple[int, int, float]:
        """Indices (k, k+1) around ``t`` and the fraction of the way to k+1."""
        if not self.covers(t):
            raise TimeRangeMismatch(f"t={t} outside [{self.t0}, {self.t_end}]")
        s = min(max((t - self.t0) / self.dt, 0.0), len(self) - 1)
        k = min(int(math.floor(s + 1e-9)), len(self) - 1)
        if k == len(self) - 1:
            return k, k, 0.0
        return k, k + 1, max(s - k, 0.0)

    def empty_mask(self, eps: float | None = None) -> np.ndarray:
        """Per-slice emptiness flags at the sub-cell threshold."""
        eps = self.grid.eps_empty if eps is None else eps
        mins = self.values.reshape(len(self), -1).min(axis=1)
        return mins > -eps

    def occupied_span(self, eps: float | None = None) -> tuple[float, float] | None:
        occ = np.flatnonzero(~self.empty_mask(eps))
        if occ.size == 0:
            return None
        return float(self.times[occ[0]]), float(self.times[occ[-1]])

    def is_empty(self, eps: float | None = None) -> bool:
        return bool(self.empty_mask(eps).all())

    def restrict(self, t_from: float, t_to: float) -> "TimeStateSet":
        k0, k1 = self.index_of(t_from), self.index_of(t_to)
        return TimeStateSet(self.grid, self.times[k0], self.dt, self.values[k0 : k1 + 1])

    def materialize(self) -> "TimeStateSet":
        """Copy broadcast views into owned storage."""
        return TimeStateSet(self.grid, self.t0, self.dt, np.ascontiguousarray(self.values, dtype=STORE_DTYPE))

    def value_at(self, z, t: float, kind: str = "safe") -> float:
        """Field value at an off-lattice time.

        Uses the bracketing slice that is worse for the caller: the larger value
        for sets one wants to be inside of (``"safe"``), the smaller for sets to
        avoid (``"danger"``).
        """
        k0, k1, frac = self.bracket(t)
        if frac <= 1e-9:
            return interpolate(self.slice(k0), z)
        a = interpolate(self.slice(k0), z)
        b = interpolate(self.slice(k1), z)
        return max(a, b) if kind == "safe" else min(a, b)


# --- interpolation -------------------------------------------------------------------


def _corner_data(grid: StateGrid, pts: np.ndarray):
    idx_lo, idx_hi, frac = [], [], []
    for d in range(grid.ndim):
        lo = grid.bounds[d][0]
        n = grid.shape[d]
        h = grid.spacing[d]
        s = (pts[:, d] - lo) / h
        if grid.periodic[d]:
            s = np.mod(s, n)
            i0 = np.floor(s).astype(np.intp)
            f = s - i0
            i0 %= n
            i1 = (i0 + 1) % n
        else:
            i0 = np.clip(np.floor(s).astype(np.intp), 0, n - 2)
            f = np.clip(s - i0, 0.0, 1.0)
            i1 = i0 + 1
        idx_lo.append(i0)
        idx_hi.append(i1)
        frac.append(f)
    return idx_lo, idx_hi, frac


def interpolate_many(values: np.ndarray, grid: StateGrid, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of node ``values`` at each row of ``pts``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[-1] != grid.ndim:
        raise GridMismatch(f"expected {grid.ndim}-dimensional points")
    grid.check_in_bounds(pts)
    idx_lo, idx_hi, frac = _corner_data(grid, pts)
    # all 2**ndim corners at once: bit d of the corner number picks the upper node in dim d
    bits = (np.arange(1 << grid.ndim)[:, None] >> np.arange(grid.ndim)) & 1
    idx, w = [], 1.0
    for d in range(grid.ndim):
        up = bits[:, d].astype(bool)
        idx.append(np.where(up, idx_hi[d][:, None], idx_lo[d][:, None]))
        w = w * np.where(up, frac[d][:, None], 1.0 - frac[d][:, None])
    return (w * values[tuple(idx)]).sum(axis=1)


def interpolate(fld: LevelSetField, z) -> float:
    """Value of ``fld`` at state ``z``; periodic coordinates wrap, others must be in bounds."""
    return float(interpolate_many(fld.values, fld.grid, np.asarray(z, dtype=float)[None])[0])


# --- set algebra ---------------------------------------------------------------------


def _check_same(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatch("operands live on different grids")
    if isinstance(a, TimeStateSet) != isinstance(b, TimeStateSet):
        raise TypeError("cannot mix LevelSetField and TimeStateSet")
    if isinstance(a, TimeStateSet):
        if abs(a.t0 - b.t0) > _TIME_TOL or abs(a.dt - b.dt) > _TIME_TOL or len(a) != len(b):
            raise TimeRangeMismatch("time-state sets are on different time lattices")


def _rebuild(like, values):
    if isinstance(like, TimeStateSet):
        return TimeStateSet(like.grid, like.t0, like.dt, values)
    return LevelSetField(like.grid, values)


def set_union(a, b):
    _check_same(a, b)
    return _rebuild(a, np.minimum(a.values, b.values))


def set_intersection(a, b):
    _check_same(a, b)
    return _rebuild(a, np.maximum(a.values, b.values))


def set_complement(a):
    return _rebuild(a, np.negative(a.values))


def aligned_values(container: TimeStateSet, contained: TimeStateSet) -> np.ndarray:
    """Container slices at the contained set's times."""
    if container.grid != contained.grid:
        raise GridMismatch("operands live on different grids")
    if abs(container.dt - contained.dt) > _TIME_TOL:
        raise TimeRangeMismatch("time-state sets have different time steps")
    off = (contained.t0 - container.t0) / container.dt
    k0 = int(round(off))
    if abs(off - k0) > 1e-6 or k0 < 0 or k0 + len(contained) > len(container):
        raise TimeRangeMismatch("contained set's time range is not inside the container's")
    return container.values[k0 : k0 + len(contained)]


def containment_margin(container, contained) -> float:
    """Largest container value over nodes inside ``contained`` (-inf if none)."""
    if isinstance(contained, TimeStateSet):
        cv = aligned_values(container, contained)
    else:
        _check_same(container, contained)
        cv = container.values
    inside = contained.values <= 0
    if not inside.any():
        return float("-inf")
    return float(np.max(np.where(inside, cv, -np.inf)))


def contains(container, contained, margin: float = 0.0) -> bool:
    """True iff every node inside ``contained`` has container value <= ``margin``."""
    return containment_margin(container, contained) <= margin


# --- region builders -----------------------------------------------------------------


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def box_values(grid: StateGrid, box: dict[int, tuple[float, float]]) -> np.ndarray:
    """Per-axis distance composition that is <= 0 exactly inside the box.

    Periodic dimensions take the interval as (center - half, center + half) on
    the circle.
    """
    mesh = grid.mesh()
    out = np.full(grid.shape, -np.inf)
    for d, (lo, hi) in box.items():
        if grid.periodic[d]:
            c, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            term = np.abs(wrap_angle(mesh[d] - c)) - half
        else:
            term = np.maximum(lo - mesh[d], mesh[d] - hi)
        out = np.maximum(out, term)
    if not box:
        out = np.full(grid.shape, -1.0)
    return out


def box_field(grid: StateGrid, box: dict[int, tuple[float, float]]) -> LevelSetField:
    return LevelSetField(grid, box_values(grid, box).astype(STORE_DTYPE))


# --- corridor file (.tss) -------------------------------------------------------------


def save_tss(path, tss: TimeStateSet) -> None:
    header = {
        "shape": list(tss.grid.shape),
        "bounds": [list(b) for b in tss.grid.bounds],
        "periodic": list(tss.grid.periodic),
        "t0": tss.t0,
        "dt": tss.dt,
        "slices": len(tss),
    }
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(tss.values, dtype="<f4").tobytes())


def load_tss(path) -> TimeStateSet:
    with open(path, "rb") as fh:
        line = fh.readline()
        raw = fh.read()
    try:
        header = json.loads(line.decode())
        shape = tuple(header["shape"])
        periodic = tuple(header.get("periodic", [False] * len(shape)))
        grid = StateGrid(tuple(tuple(b) for b in header["bounds"]), shape, periodic)
        data = np.frombuffer(raw, dtype="<f4")
        n = header.get("slices", data.size // grid.size)
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: not a time-state set file ({exc})") from None
    if data.size != n * grid.size:
        raise CorruptFile(f"{path}: payload has {data.size} floats, expected {n * grid.size}")
    return TimeStateSet(grid, header["t0"], header["dt"], data.reshape((n,) + shape).astype(STORE_DTYPE))
