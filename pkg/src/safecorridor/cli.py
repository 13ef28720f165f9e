"""Command line entry point: ``run``, ``precompute``, ``serve`` and ``slice``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import load_config
from .corridor import Pass1Table
from .errors import CorridorError
from .grid import load_tss
from .scenario import build_manager, export_slice, run_scenario

log = logging.getLogger("safecorridor")


def _table(path: str | None) -> Pass1Table | None:
    return None if path is None else Pass1Table(path)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_scenario(cfg, args.out, _table(args.table))
    for o in result.outcomes:
        if o.granted:
            r = o.reservation
            lo, hi = r.exit_window
            print(f"{o.vehicle.id}: {r.reservation_id} exit [{lo:.2f}, {hi:.2f}]  total {r.timings['total']:.2f} s")
        else:
            print(f"{o.vehicle.id}: rejected ({o.error.code})")
    print(f"outputs in {args.out}")
    return 0


def cmd_precompute(args) -> int:
    cfg = load_config(args.config)
    table = Pass1Table(args.table)
    manager = build_manager(cfg, table)
    for route in sorted({(v.entry, v.exit) for v in cfg.vehicles}):
        t = time.perf_counter()
        manager.pass1(*route)
        print(f"{route[0]} -> {route[1]}: {time.perf_counter() - t:.2f} s")
    print(f"table in {args.table}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    cfg = load_config(args.config)
    manager = build_manager(cfg, _table(args.table))
    serve(manager, args.host, args.port)
    return 0


def cmd_slice(args) -> int:
    tss = load_tss(args.tss)
    rows = export_slice(tss, args.kind, args.at, args.out)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safecorridor", description="Safe time-state corridors for intersections.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="admit and roll out every vehicle of a scenario")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--table", help="Pass-1 table directory (default: in memory)")
    r.set_defaults(fn=cmd_run)

    pc = sub.add_parser("precompute", help="fill the Pass-1 table for the scenario's routes")
    pc.add_argument("config")
    pc.add_argument("--table", default="pass1_table")
    pc.set_defaults(fn=cmd_precompute)

    s = sub.add_parser("serve", help="start the line-delimited JSON manager API")
    s.add_argument("config")
    s.add_argument("--port", type=int, default=7700)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--table")
    s.set_defaults(fn=cmd_serve)

    sl = sub.add_parser("slice", help="export an x-y or x-t slice of a corridor file as CSV")
    sl.add_argument("tss")
    sl.add_argument("--kind", choices=("xy", "xt"), required=True)
    sl.add_argument("--at", type=float, required=True, help="time for xy, y coordinate for xt")
    sl.add_argument("--out", required=True)
    sl.set_defaults(fn=cmd_slice)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except CorridorError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
