"""Fused stencil kernels for the 4-state bicycle model.

One call advances every node by one explicit step (per-control upwind or
Lax-Friedrichs) and applies the goal (min) and constraint (max) masks. Nodes are independent, so the
outer loop is a parallel map; the caller's loop over steps is the barrier.
Non-periodic edges use a zero-gradient ghost node, which keeps both schemes
monotone (a linear extrapolation would not be).
"""

from __future__ import annotations

import numba

# TBB in this image is too old for numba; OpenMP is thread-safe for concurrent callers
numba.config.THREADING_LAYER = "omp"


@numba.njit(parallel=True, cache=True)
def lf_step_bicycle(
    V, out, dtau, inv_h, alpha, cos_th, sin_th, v_axis, k_lo, k_hi, a_lo, a_hi,
    backward, goal, use_goal, cons, use_cons,
):
    nx, ny, nt, nv = V.shape
    for i in numba.prange(nx):
        for j in range(ny):
            for a in range(nt):
                ap = (a + 1) % nt
                am = (a - 1 + nt) % nt
                for b in range(nv):
                    c = V[i, j, a, b]
                    if i < nx - 1:
                        dp0 = (V[i + 1, j, a, b] - c) * inv_h[0]
                    else:
                        dp0 = 0.0
                    if i > 0:
                        dm0 = (c - V[i - 1, j, a, b]) * inv_h[0]
                    else:
                        dm0 = 0.0
                    if j < ny - 1:
                        dp1 = (V[i, j + 1, a, b] - c) * inv_h[1]
                    else:
                        dp1 = 0.0
                    if j > 0:
                        dm1 = (c - V[i, j - 1, a, b]) * inv_h[1]
                    else:
                        dm1 = 0.0
                    dp2 = (V[i, j, ap, b] - c) * inv_h[2]
                    dm2 = (c - V[i, j, am, b]) * inv_h[2]
                    if b < nv - 1:
                        dp3 = (V[i, j, a, b + 1] - c) * inv_h[3]
                    else:
                        dp3 = 0.0
                    if b > 0:
                        dm3 = (c - V[i, j, a, b - 1]) * inv_h[3]
                    else:
                        dm3 = 0.0
                    p0 = 0.5 * (dp0 + dm0)
                    p1 = 0.5 * (dp1 + dm1)
                    p2 = 0.5 * (dp2 + dm2)
                    p3 = 0.5 * (dp3 + dm3)
                    vel = v_axis[b]
                    ham = p0 * (vel * cos_th[a]) + p1 * (vel * sin_th[a])
                    k = p2 * vel
                    s1 = k * k_lo
                    s2 = k * k_hi
                    u1 = p3 * a_lo
                    u2 = p3 * a_hi
                    diss = 0.5 * (
                        alpha[0] * (dp0 - dm0)
                        + alpha[1] * (dp1 - dm1)
                        + alpha[2] * (dp2 - dm2)
                        + alpha[3] * (dp3 - dm3)
                    )
                    if backward:
                        ham += min(s1, s2) + min(u1, u2)
                        new = c + dtau * (ham + diss)
                    else:
                        ham += max(s1, s2) + max(u1, u2)
                        new = c + dtau * (diss - ham)
                    if use_goal:
                        g = goal[i, j, a, b]
                        if g < new:
                            new = g
                    if use_cons:
                        q = cons[i, j, a, b]
                        if q > new:
                            new = q
                    out[i, j, a, b] = new


@numba.njit(inline="always")
def _up(f_lo, f_hi, dp, dm, backward):
    if backward:
        a = max(f_lo, 0.0) * dp + min(f_lo, 0.0) * dm
        b = max(f_hi, 0.0) * dp + min(f_hi, 0.0) * dm
        r = min(a, b)
        if f_lo <= 0.0 <= f_hi:
            r = min(r, 0.0)
    else:
        a = max(f_lo, 0.0) * dm + min(f_lo, 0.0) * dp
        b = max(f_hi, 0.0) * dm + min(f_hi, 0.0) * dp
        r = max(a, b)
        if f_lo <= 0.0 <= f_hi:
            r = max(r, 0.0)
    return r


@numba.njit(parallel=True, cache=True)
def upwind_step_bicycle(
    V, out, dtau, inv_h, cos_th, sin_th, v_axis, k_lo, k_hi, a_lo, a_hi,
    backward, goal, use_goal, cons, use_cons,
):
    nx, ny, nt, nv = V.shape
    for i in numba.prange(nx):
        for j in range(ny):
            for a in range(nt):
                ap = (a + 1) % nt
                am = (a - 1 + nt) % nt
                for b in range(nv):
                    c = V[i, j, a, b]
                    if i < nx - 1:
                        dp0 = (V[i + 1, j, a, b] - c) * inv_h[0]
                    else:
                        dp0 = 0.0
                    if i > 0:
                        dm0 = (c - V[i - 1, j, a, b]) * inv_h[0]
                    else:
                        dm0 = 0.0
                    if j < ny - 1:
                        dp1 = (V[i, j + 1, a, b] - c) * inv_h[1]
                    else:
                        dp1 = 0.0
                    if j > 0:
                        dm1 = (c - V[i, j - 1, a, b]) * inv_h[1]
                    else:
                        dm1 = 0.0
                    dp2 = (V[i, j, ap, b] - c) * inv_h[2]
                    dm2 = (c - V[i, j, am, b]) * inv_h[2]
                    if b < nv - 1:
                        dp3 = (V[i, j, a, b + 1] - c) * inv_h[3]
                    else:
                        dp3 = 0.0
                    if b > 0:
                        dm3 = (c - V[i, j, a, b - 1]) * inv_h[3]
                    else:
                        dm3 = 0.0
                    vel = v_axis[b]
                    fx = vel * cos_th[a]
                    fy = vel * sin_th[a]
                    s1 = vel * k_lo
                    s2 = vel * k_hi
                    rate = (
                        _up(fx, fx, dp0, dm0, backward)
                        + _up(fy, fy, dp1, dm1, backward)
                        + _up(min(s1, s2), max(s1, s2), dp2, dm2, backward)
                        + _up(a_lo, a_hi, dp3, dm3, backward)
                    )
                    if backward:
                        new = c + dtau * rate
                    else:
                        new = c - dtau * rate
                    if use_goal:
                        g = goal[i, j, a, b]
                        if g < new:
                            new = g
                    if use_cons:
                        q = cons[i, j, a, b]
                        if q > new:
                            new = q
                    out[i, j, a, b] = new
