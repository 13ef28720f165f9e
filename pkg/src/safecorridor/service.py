"""Line-delimited JSON front end for the intersection manager.

Each request is one JSON object per line and gets exactly one JSON line back.
``handle`` is transport-free so it can be tested directly; ``serve`` wraps it
in a threaded TCP server (admissions still serialize inside the manager).
"""

from __future__ import annotations

import json
import logging
import math
import socketserver
import threading

from .errors import CorridorError
from .manager import IntersectionManager

log = logging.getLogger(__name__)


def _num(x: float) -> float | None:
    # JSON has no NaN; infeasible limits report null bounds
    return None if x is None or not math.isfinite(x) else float(x)


def _error(code: str, message: str, margin: float | None = None) -> dict:
    out = {"ok": False, "error": code, "message": message}
    if margin is not None:
        out["margin"] = _num(margin)
    return out


def handle(manager: IntersectionManager, req: dict) -> dict:
    """Dispatch one decoded request and return the reply object."""
    try:
        op = req["op"]
        if op == "reserve":
            res = manager.reserve(
                req["vehicle_id"], req["entry"], tuple(req["entry_window"]), req["exit"], float(req["delta"])
            )
            return {"ok": True, "reservation_id": res.reservation_id, "exit_window": list(res.exit_window)}
        if op == "limits":
            lim = manager.query_limits(req["reservation_id"], req["state"], float(req["steer"]), float(req["time"]))
            return {
                "ok": True,
                "feasible": lim.feasible,
                "a": _num(lim.a),
                "b": _num(lim.b),
                "accel_min": _num(lim.accel_min),
                "accel_max": _num(lim.accel_max),
            }
        if op == "release":
            manager.release(req["reservation_id"])
            return {"ok": True}
        return _error("unknown_op", f"unknown op {op!r}")
    except CorridorError as exc:
        return _error(exc.code, str(exc), getattr(exc, "margin", None))
    except (KeyError, TypeError, ValueError) as exc:
        return _error("bad_request", f"{type(exc).__name__}: {exc}")


def handle_line(manager: IntersectionManager, line: str | bytes) -> str:
    try:
        req = json.loads(line)
    except json.JSONDecodeError as exc:
        reply = _error("bad_json", str(exc))
    else:
        reply = handle(manager, req) if isinstance(req, dict) else _error("bad_request", "expected an object")
    return json.dumps(reply, allow_nan=False)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            if not raw.strip():
                continue
            self.wfile.write((handle_line(self.server.manager, raw) + "\n").encode())
            self.wfile.flush()


class CorridorServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, manager: IntersectionManager, host: str = "127.0.0.1", port: int = 0):
        self.manager = manager
        super().__init__((host, port), _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        th = threading.Thread(target=self.serve_forever, daemon=True)
        th.start()
        return th


def serve(manager: IntersectionManager, host: str = "127.0.0.1", port: int = 7700) -> None:
    with CorridorServer(manager, host, port) as srv:
        log.info("listening on %s:%d", host, srv.port)
        srv.serve_forever()
