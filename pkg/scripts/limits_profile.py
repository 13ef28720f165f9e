"""Admissible acceleration against speed at one planar pose of a corridor.

Defaults reproduce the acceptance query: the second vehicle of the
perpendicular scenario at (-0.75, -0.25), heading east.

    python3 scripts/limits_profile.py --out profile.csv
"""

from __future__ import annotations

import argparse
import csv

import numpy as np

from _common import use_test_oracles
from safecorridor.config import bundled, load_config
from safecorridor.limits import limits_profile
from safecorridor.scenario import run_scenario

use_test_oracles()
from test_acceptance import V_SAMPLES, fig3c_query_time  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="perpendicular")
    ap.add_argument("--vehicle", default="blue")
    ap.add_argument("--pose", type=float, nargs=3, default=(-0.75, -0.25, 0.0), metavar=("X", "Y", "THETA"))
    ap.add_argument("--time", type=float, help="query time (default: slice with the most feasible speeds)")
    ap.add_argument("--out", default="profile.csv")
    args = ap.parse_args()

    result = run_scenario(load_config(bundled(args.scenario)))
    res = next(o for o in result.granted() if o.vehicle.id == args.vehicle).reservation
    model = result.manager.model
    t = args.time if args.time is not None else fig3c_query_time(res.corridor, model, *args.pose)
    prof = limits_profile(res.corridor, model, *args.pose, t, V_SAMPLES)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "feasible", "accel_min", "accel_max", "a", "b"])
        for v, p in zip(V_SAMPLES, prof):
            lo, hi = (p.accel_min, p.accel_max) if p.feasible else (np.nan, np.nan)
            w.writerow([f"{v:.2f}", int(p.feasible), f"{lo:.4f}", f"{hi:.4f}", f"{p.a:.6f}", f"{p.b:.6f}"])
            print(f"v={v:.2f}  " + (f"[{lo:+.3f}, {hi:+.3f}]" if p.feasible else "infeasible"))
    print(f"t={t:.2f}; rows in {args.out}")


if __name__ == "__main__":
    main()
