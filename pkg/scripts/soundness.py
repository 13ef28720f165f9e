"""Randomized closed-loop rollouts inside every granted corridor.

Writes one CSV row per trial and prints the sound fraction split by how deep
inside the corridor the start state was.

    python3 scripts/soundness.py --trials 1000 --out soundness.csv
"""

from __future__ import annotations

import argparse
import csv

import numpy as np

from _common import SCENARIOS
from safecorridor.config import bundled, load_config
from safecorridor.rollout import random_trials
from safecorridor.scenario import run_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--fallback", choices=("optimal", "descent", "brake", "hold"), default="optimal")
    ap.add_argument("--scenarios", nargs="+", default=list(SCENARIOS))
    ap.add_argument("--out", default="soundness.csv")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    jobs = []
    for name in args.scenarios:
        result = run_scenario(load_config(bundled(name)))
        jobs += [(name, result.manager, o) for o in result.granted()]
    per = -(-args.trials // len(jobs))
    rows = []
    for name, m, o in jobs:
        res = o.reservation
        entry, exit = res.route
        lay, model = m.layout, m.model
        trials = random_trials(
            res.corridor, model, lay.centerline(entry, exit), res.exit_window,
            lambda z, a=exit: lay.in_exit_region(z, a, model.speed_limit),
            res.entry_window[0], per, rng, fallback=args.fallback,
        )
        rows += [(name, o.vehicle.id, tr) for tr in trials]
        ok = sum(tr.ok for tr in trials)
        print(f"{name:14s} {o.vehicle.id:8s} {ok}/{len(trials)} sound")

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "vehicle", "x", "y", "theta", "v", "margin_cells", "stayed", "exited", "max_value"])
        for name, vid, tr in rows:
            w.writerow([name, vid, *(f"{c:.6f}" for c in tr.start), f"{tr.start_margin:.3f}",
                        int(tr.stayed), int(tr.exited), f"{tr.max_value:.6f}"])

    trials = [tr for *_, tr in rows]
    print(f"overall {np.mean([tr.ok for tr in trials]):.1%} sound over {len(trials)} rollouts")
    for lo, hi in ((0, 1), (1, 2), (2, np.inf)):
        band = [tr.ok for tr in trials if lo <= tr.start_margin < hi]
        if band:
            print(f"  start margin [{lo}, {hi}) cells: {len(band)} starts, {1 - np.mean(band):.1%} failed")
    print(f"rows in {args.out}")


if __name__ == "__main__":
    main()
