"""HTTP control API: deploy-time steering and observation surface.

Endpoints::

    GET  /status                 tick, state, population, per-pod stats
    GET  /agents/{id}            profile + state + recent events
    POST /pause | /resume        halt/continue at the next barrier
    POST /step                   {"n": k} advance exactly k ticks (paused only)
    POST /rules                  {"rules": [...]} hot-reload validation rules
    POST /rollback               {"snapshot": id} or {"tick": t}
    POST /broadcast              {"name", "payload", "filter"} global event
    POST /agents/{id}/message    {"text": ...} SYSTEM message to one agent
    GET  /events                 server-sent events, one canonical record per frame

All mutating commands queue into the simulation and apply at tick barriers,
so no API client can violate the barrier. Slow /events subscribers drop
oldest frames rather than stalling the simulation.
"""
from __future__ import annotations

import json
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from .simulation import Simulation

_AGENT_PATH = re.compile(r"^/agents/([^/]+)$")
_AGENT_MSG_PATH = re.compile(r"^/agents/([^/]+)/message$")


class ControlApiServer:
    def __init__(self, sim: Simulation, host: str = "127.0.0.1", port: int = 0):
        self.sim = sim
        handler = _make_handler(sim)
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


def _make_handler(sim: Simulation):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args) -> None:
            pass

        # -- helpers --------------------------------------------------------

        def _json(self, code: int, doc: Any) -> None:
            body = json.dumps(doc).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> dict[str, Any]:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            return json.loads(self.rfile.read(length) or b"{}")

        def _command(self, name: str, payload: dict[str, Any] | None = None) -> None:
            result = sim.submit(name, payload or {})
            if result.get("ok"):
                self._json(200, result["value"])
            else:
                code = 404 if "unknown agent" in result.get("error", "") else 409
                self._json(code, {"error": result.get("error"), "state": result.get("state")})

        # -- routes -----------------------------------------------------------

        def do_GET(self) -> None:
            if self.path == "/status":
                self._command("status")
                return
            if self.path == "/events":
                self._stream_events()
                return
            match = _AGENT_PATH.match(self.path)
            if match:
                self._command("query", {"agent": match.group(1)})
                return
            self._json(404, {"error": f"no route {self.path}"})

        def do_POST(self) -> None:
            body = self._body()
            if self.path == "/pause":
                self._command("pause")
            elif self.path == "/resume":
                self._command("resume")
            elif self.path == "/step":
                self._command("step", {"n": body.get("n", 1)})
            elif self.path == "/rules":
                self._command("rules", {"rules": body.get("rules", [])})
            elif self.path == "/rollback":
                self._command("rollback", body)
            elif self.path == "/broadcast":
                self._command("broadcast", body)
            elif self.path == "/stop":
                self._command("stop")
            else:
                match = _AGENT_MSG_PATH.match(self.path)
                if match:
                    self._command("dispatch", {"agent": match.group(1), "text": body.get("text", "")})
                else:
                    self._json(404, {"error": f"no route {self.path}"})

        def _stream_events(self) -> None:
            frames: "queue.Queue[tuple[str, str]]" = queue.Queue(maxsize=10000)
            token = object()

            def push(channel: str, line: str) -> None:
                try:
                    frames.put_nowait((channel, line))
                except queue.Full:  # drop oldest for slow clients
                    try:
                        frames.get_nowait()
                        frames.put_nowait((channel, line))
                    except queue.Empty:
                        pass

            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            sim.system.recorder.subscribe(push, token)
            try:
                while True:
                    try:
                        channel, line = frames.get(timeout=1.0)
                    except queue.Empty:
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        continue
                    frame = f"data: {line}\n\n"
                    if channel != "event":
                        frame = f"event: {channel}\n{frame}"
                    self.wfile.write(frame.encode("utf-8"))
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                sim.system.recorder.unsubscribe(token)

    return Handler
