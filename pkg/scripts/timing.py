"""Admission timings per vehicle and driving-limits query latency.

    python3 scripts/timing.py --queries 200
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from _common import SCENARIOS
from safecorridor.config import bundled, load_config
from safecorridor.rollout import sample_initial_states
from safecorridor.scenario import run_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--scenarios", nargs="+", default=list(SCENARIOS))
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'scenario':14s} {'vehicle':8s} {'pass2':>7s} {'pass3':>7s} {'pass4':>7s} {'total':>7s}")
    for name in args.scenarios:
        result = run_scenario(load_config(bundled(name)))
        for o in result.outcomes:
            if not o.granted:
                print(f"{name:14s} {o.vehicle.id:8s} rejected ({o.error.code})")
                continue
            t = o.reservation.timings
            print(f"{name:14s} {o.vehicle.id:8s} " + " ".join(f"{t[k]:7.2f}" for k in ("pass2", "pass3", "pass4", "total")))
        m, granted = result.manager, result.granted()
        if not granted:
            continue
        queries = []
        for _ in range(args.queries):
            res = granted[int(rng.integers(len(granted)))].reservation
            lo, hi = res.corridor.occupied_span()
            t = float(rng.choice(res.corridor.times[res.corridor.index_of(lo): res.corridor.index_of(hi) + 1]))
            z = sample_initial_states(res.corridor, t, 1, rng)[0]
            queries.append((res.reservation_id, z, float(rng.uniform(*m.model.steer_bounds)), t))
        lat = []
        for q in queries:
            s = time.perf_counter()
            m.query_limits(*q)
            lat.append(1e3 * (time.perf_counter() - s))
        print(f"{name:14s} limits: mean {np.mean(lat):.3f} ms, p99 {np.percentile(lat, 99):.3f} ms")


if __name__ == "__main__":
    main()
