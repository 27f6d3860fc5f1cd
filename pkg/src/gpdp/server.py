"""Online evaluation server for a single released function.

Requests and replies are newline-delimited JSON::

    {"op": "eval", "x": [0.25]}   ->  {"ok": true, "value": 1.73, "index": 0}
    {"op": "info"}                ->  {"ok": true, "dim": 1, "sigma": ..., "answered": 1}

Every newly drawn noise value is appended to the state file and flushed to
disk *before* the reply is written, so a crash can never lead to the same
point being answered twice with different values. On start-up the state file
is replayed into the sampler.
"""

from __future__ import annotations

import json
import math
import os
import socketserver
import threading

import numpy as np

from .errors import GpdpError, StateFileError
from .estimators import ReleasedFunction
from .gp_noise import QueryState
from .rkhs import evaluate_points


def read_state(path, dim):
    """Parse a state file; a missing file is an empty state."""
    if not os.path.exists(path):
        return QueryState(dim)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text and not text.endswith("\n"):
        raise StateFileError(f"{path}: last record is truncated")
    return QueryState.from_lines(text.splitlines(), dim)


class OnlineServer:
    """Answers evaluation requests against one :class:`ReleasedFunction`."""

    def __init__(self, released: ReleasedFunction, state_path, clamp_nonnegative=False):
        self.released = released
        self.state_path = state_path
        self.clamp = clamp_nonnegative
        self._lock = threading.Lock()
        state = read_state(state_path, released.dim)
        released.sampler.restore(state)
        self._fh = open(state_path, "a", encoding="utf-8")

    def close(self):
        self._fh.close()

    def _persist(self, x, noise):
        self._fh.write(QueryState.format_line(x, noise) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def evaluate(self, x):
        """Return ``(value, index)`` for one point, persisting fresh draws."""
        released = self.released
        pts = released.base.kernel.as_points(np.asarray(x, dtype=float).reshape(1, -1))
        if not np.all(np.isfinite(pts)):
            raise GpdpError("query point must be finite")
        released._check_domain(pts)
        sampler = released.sampler
        index = sampler.lookup(pts[0])
        if index is None:
            noise = sampler.query(pts[0])
            index = len(sampler) - 1
            self._persist(pts[0], noise)
        else:
            noise = sampler.state.noise[index]
        value = float(evaluate_points(released.base, pts)[0]) + noise
        if self.clamp:
            value = max(value, 0.0)
        return value, index

    def handle(self, line):
        """Process one request line and return the reply line (no newline)."""
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            return json.dumps({"ok": False, "error": f"malformed JSON: {exc.msg}"})
        if not isinstance(req, dict):
            return json.dumps({"ok": False, "error": "request must be a JSON object"})
        op = req.get("op")
        with self._lock:
            if op == "info":
                return json.dumps({
                    "ok": True,
                    "dim": self.released.dim,
                    "sigma": self.released.sigma,
                    "answered": len(self.released.sampler),
                })
            if op != "eval":
                return json.dumps({"ok": False, "error": f"unknown op {op!r}"})
            x = req.get("x")
            if isinstance(x, (int, float)) and not isinstance(x, bool):
                x = [x]
            if (not isinstance(x, list) or len(x) != self.released.dim
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool)
                               and math.isfinite(c) for c in x)):
                return json.dumps({
                    "ok": False,
                    "error": f"x must be a list of {self.released.dim} finite numbers",
                })
            try:
                value, index = self.evaluate(x)
            except GpdpError as exc:
                return json.dumps({"ok": False, "error": str(exc)})
            return json.dumps({"ok": True, "value": value, "index": index})

    def serve_stream(self, infile, outfile):
        for line in infile:
            if not line.strip():
                continue
            outfile.write(self.handle(line) + "\n")
            outfile.flush()

    def serve_tcp(self, host, port):
        server = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for raw in self.rfile:
                    line = raw.decode("utf-8")
                    if not line.strip():
                        continue
                    reply = server.handle(line) + "\n"
                    self.wfile.write(reply.encode("utf-8"))
                    self.wfile.flush()

        socketserver.ThreadingTCPServer.allow_reuse_address = True
        with socketserver.ThreadingTCPServer((host, port), Handler) as tcp:
            tcp.serve_forever()
