"""Independent reference computations used by the tests.

Nothing here calls the level-set solver; the oracles work on explicit node
sets and closed-form transitions.
"""

from __future__ import annotations

import numpy as np


def double_integrator_successors(grid, dt, controls):
    """Index of the snapped successor node for every (node, control) pair.

    Uses the exact constant-input solution over ``dt``. Successors leaving
    the grid are marked -1.
    """
    xs, vs = grid.axes
    X, Vv = np.meshgrid(xs, vs, indexing="ij")
    succ = []
    for a in controls:
        x1 = X + Vv * dt + 0.5 * a * dt * dt
        v1 = Vv + a * dt
        ix = np.rint((x1 - xs[0]) / grid.spacing[0]).astype(int)
        iv = np.rint((v1 - vs[0]) / grid.spacing[1]).astype(int)
        ok = (ix >= 0) & (ix < len(xs)) & (iv >= 0) & (iv < len(vs))
        flat = np.where(ok, ix * len(vs) + np.clip(iv, 0, len(vs) - 1), -1)
        succ.append(flat.ravel())
    return np.stack(succ, axis=1)


def bfs_backward(goal_masks, cons_masks, succ):
    """Graph version of the backward tube: S_k = (G_k | pre(S_{k+1})) & C_k.

    ``goal_masks`` and ``cons_masks`` are (K, n_nodes) booleans; returns the same.
    """
    K, n = cons_masks.shape
    out = np.zeros((K, n), dtype=bool)
    cur = goal_masks[-1] & cons_masks[-1]
    out[-1] = cur
    for k in range(K - 2, -1, -1):
        ext = np.append(cur, False)
        pre = ext[succ].any(axis=1)
        cur = (goal_masks[k] | pre) & cons_masks[k]
        out[k] = cur
    return out


def bfs_forward(init_masks, cons_masks, succ):
    """Graph version of the forward tube: S_k = (I_k | post(S_{k-1})) & C_k."""
    K, n = cons_masks.shape
    out = np.zeros((K, n), dtype=bool)
    cur = init_masks[0] & cons_masks[0]
    out[0] = cur
    for k in range(1, K):
        post = np.zeros(n + 1, dtype=bool)
        src = np.repeat(cur[:, None], succ.shape[1], axis=1)
        post[succ[src]] = True
        cur = (init_masks[k] | post[:n]) & cons_masks[k]
        out[k] = cur
    return out


def jaccard(a, b):
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else np.count_nonzero(a & b) / union


def brute_force_dilation(occupied, spacing, radius):
    """Nodes within Euclidean ``radius`` of an occupied node (pairwise check)."""
    nx, ny = occupied.shape
    ii, jj = np.nonzero(occupied)
    out = np.zeros_like(occupied)
    if ii.size == 0:
        return out
    for i in range(nx):
        for j in range(ny):
            d2 = ((ii - i) * spacing[0]) ** 2 + ((jj - j) * spacing[1]) ** 2
            out[i, j] = bool((d2 <= radius * radius * (1 + 1e-9)).any())
    return out


def exit_window_by_enumeration(times, nonempty, delta, dt):
    """Earliest [t, t+delta] with every lattice time in it occupied, by brute force."""
    m = int(round(delta / dt))
    for k in range(len(times)):
        if k + m >= len(times):
            break
        if all(nonempty[k : k + m + 1]):
            return float(times[k]), float(times[k] + delta)
    return None
