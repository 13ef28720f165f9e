"""Grid solver against the exact lattice reachability oracle on the double integrator.

Sweeps goal sizes and reports the per-slice minimum Jaccard index for the
backward and forward tubes.

    python3 scripts/oracle_compare.py
"""

from __future__ import annotations

import argparse
import itertools
import time

import numpy as np

from _common import use_test_oracles
from safecorridor.dynamics import DoubleIntegrator
from safecorridor.grid import StateGrid, TimeStateSet, box_field
from safecorridor.reach import backward_tube, forward_tube

use_test_oracles()
from oracles import bfs_backward, bfs_forward, double_integrator_successors, jaccard  # noqa: E402


def compare(nx: int, nv: int, gx: float, gv: float, scheme: str, dt=0.2, K=9):
    model = DoubleIntegrator()
    grid = StateGrid(((-0.25, 0.25), (-0.5, 0.5)), (nx, nv), (False, False))
    goal = box_field(grid, {0: (-gx, gx), 1: (-gv, gv)})
    cons = box_field(grid, {0: (-0.221, 0.221)})
    succ = double_integrator_successors(grid, dt, np.linspace(*model.accel_bounds, 5))
    C = TimeStateSet.constant_in_time(cons, 0.0, dt, K)
    Cm = np.repeat((cons.values <= 0).ravel()[None], K, axis=0)
    gm = (goal.values <= 0).ravel()
    back = backward_tube(model, TimeStateSet.on_window(goal, ((K - 3) * dt, (K - 1) * dt), 0.0, dt), C, scheme=scheme)
    G = np.zeros((K, grid.size), dtype=bool)
    G[K - 3:] = gm
    ref = bfs_backward(G, Cm, succ)
    jb = min(jaccard(back.values[k].ravel() <= 0, ref[k]) for k in range(K))
    fwd = forward_tube(model, TimeStateSet.on_window(goal, (0.0, 2 * dt), 0.0, dt), C, scheme=scheme)
    I = np.zeros((K, grid.size), dtype=bool)
    I[:3] = gm
    ref = bfs_forward(I, Cm, succ)
    jf = min(jaccard(fwd.values[k].ravel() <= 0, ref[k]) for k in range(K))
    return jb, jf


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", nargs="+", default=["101x41", "51x21"])
    ap.add_argument("--goals", nargs="+", default=["0.121x0.201", "0.101x0.151", "0.151x0.251"])
    ap.add_argument("--schemes", nargs="+", default=["upwind", "lf"])
    args = ap.parse_args()
    print(f"{'grid':8s} {'goal':12s} {'scheme':7s} {'backward':>9s} {'forward':>8s} {'secs':>6s}")
    for g, goal, scheme in itertools.product(args.grids, args.goals, args.schemes):
        nx, nv = map(int, g.split("x"))
        gx, gv = map(float, goal.split("x"))
        s = time.perf_counter()
        jb, jf = compare(nx, nv, gx, gv, scheme)
        print(f"{g:8s} {goal:12s} {scheme:7s} {jb:9.3f} {jf:8.3f} {time.perf_counter() - s:6.1f}")


if __name__ == "__main__":
    main()
