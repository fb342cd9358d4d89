"""Multi-process pod transport: length-prefixed framed records over TCP.

Wire format: every record is a 4-byte big-endian length prefix followed by
canonical JSON. A worker opens the connection with a handshake record
carrying the protocol version and its pod id; the coordinator acknowledges,
then sends a configure record (scenario path, seed, ticks per day, engine).

After that the coordinator drives the worker in lock-step: it sends a
request frame and reads frames until the matching response arrives; any
interleaved ``call`` frames are service callbacks (kv access, routing,
message drains) that the coordinator answers from its authoritative modules.
Only agent cognition executes worker-side; environment, actions, rules,
stores, and the event log stay on the coordinator, which is what keeps a TCP
run's event log identical to the in-process run.
"""
from __future__ import annotations

import argparse
import json
import socket
import struct
import subprocess
import sys
import time
from typing import Any

from .agents import Agent, AgentManager, AgentSpec
from .canon import canon_json
from .controller import Controller
from .kernel import ActionRequest, ActionResult, EventRecord, Message
from .pods import MasPod

PROTOCOL_VERSION = 1


class WireError(Exception):
    pass


def send_frame(sock: socket.socket, record: dict[str, Any]) -> None:
    body = canon_json(record).encode("utf-8")
    sock.sendall(struct.pack(">I", len(body)) + body)


def recv_frame(sock: socket.socket) -> dict[str, Any]:
    header = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    return json.loads(_read_exact(sock, length).decode("utf-8"))


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            raise WireError("connection closed")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


# ---------------------------------------------------------------------------
# Coordinator side
# ---------------------------------------------------------------------------


class PodClient(MasPod):
    """A MasPod whose agent execution happens in a remote worker process.

    Roster, commits, events, and stores remain authoritative on the
    coordinator (via the inherited manager); activation/removal commits are
    mirrored to the worker so it can host the cognitive chain.
    """

    def __init__(
        self,
        pid: str,
        controller: Controller,
        manager: AgentManager,
        conn: socket.socket,
        stores: Any,
    ):
        super().__init__(pid, controller, manager)
        self._conn = conn
        self._stores = stores
        self._req_id = 0
        # routine commits must reach the worker's roster mirror too
        ledger_hook = manager.on_routine_committed

        def chained(aid: str, routine: tuple[str, ...]) -> None:
            ledger_hook(aid, routine)
            self.request("set_routine", {"aid": aid, "routine": list(routine)})

        manager.on_routine_committed = chained

    def request(self, op: str, args: dict[str, Any] | None = None) -> Any:
        self._req_id += 1
        send_frame(self._conn, {"t": "req", "id": self._req_id, "op": op, "args": args or {}})
        while True:
            frame = recv_frame(self._conn)
            if frame["t"] == "res" and frame["id"] == self._req_id:
                if frame.get("error"):
                    raise WireError(f"worker {self.id}: {frame['error']}")
                return frame.get("value")
            if frame["t"] == "call":
                value, error = self._serve_call(frame["op"], frame["args"])
                send_frame(self._conn, {"t": "call_res", "id": frame["id"], "value": value, "error": error})
                continue
            raise WireError(f"unexpected frame {frame['t']!r}")

    def _serve_call(self, op: str, args: dict[str, Any]) -> tuple[Any, str | None]:
        try:
            return self._handle_call(op, args), None
        except Exception as exc:
            return None, f"{type(exc).__name__}: {exc}"

    def _handle_call(self, op: str, args: dict[str, Any]) -> Any:
        controller = self.controller
        if op == "kv":
            store = self._stores.store(tuple(args["ns"]))
            kind = args["op"]
            if kind == "get":
                return store.get(args["key"])
            if kind == "put":
                store.put(args["key"], args["value"])
                return True
            if kind == "delete":
                return store.delete(args["key"])
            if kind == "scan":
                return store.scan_prefix(args["prefix"])
            if kind == "contains":
                return store.contains(args["key"])
            raise WireError(f"unknown kv op {kind!r}")
        if op == "route_action":
            req = ActionRequest(
                caller=args["caller"], action_name=args["name"], args=args["args"], tick=args["tick"]
            )
            result = controller.route_action(req, caller_is_agent=True)
            return {"status": result.status, "detail": result.detail, "rule_id": result.rule_id}
        if op == "route_env":
            return controller.route_env(args["component"], args["method"], args["args"], log=False)
        if op == "route_send":
            message = controller.route_send(args["sender"], args["recipients"], args["payload"])
            return message.to_doc()
        if op == "drain":
            return [m.to_doc() for m in controller.drain_for(args["agent"], args["tick"])]
        if op == "record":
            controller.system.recorder.record(EventRecord.from_line(args["line"]))
            return True
        if op == "recipient_known":
            return controller.recipient_known(args["agent"])
        if op == "remove_agent":
            controller.remove_agent(args["agent"], args["cause"])
            return True
        if op == "spawn":
            specs = [AgentSpec.from_doc(doc) for doc in args["specs"]]
            return controller.spawn_agents(specs)
        if op == "action_table":
            table = controller.actions.table
            return {
                "version": controller.actions.version,
                "descriptors": [
                    {
                        "name": d.name,
                        "owner_plugin": d.owner_plugin,
                        "callable_by_agents": d.callable_by_agents,
                        "arg_schema": d.arg_schema,
                        "category": d.category,
                    }
                    for d in table.descriptors()
                ],
            }
        raise WireError(f"unknown service op {op!r}")

    # -- MasPod surface overrides -------------------------------------------------

    def execute_agent(self, aid: str, tick: int) -> None:
        started = time.perf_counter()
        self.request(
            "execute",
            {"aid": aid, "tick": tick, "table_version": self.controller.actions.version},
        )
        self.last_tick_ms += (time.perf_counter() - started) * 1000.0

    def commit_activations(self, tick: int) -> list[str]:
        added = super().commit_activations(tick)
        for aid in added:
            self.request("admit", {"spec": self.manager.agent(aid).spec.to_doc()})
        return added

    def commit_removals(self, tick: int) -> list[str]:
        removed = super().commit_removals(tick)
        for aid in removed:
            self.request("drop", {"aid": aid})
        return removed

    def stats_probe(self) -> dict[str, Any]:
        return self.request("stats")

    def resync(self) -> None:
        specs = [self.manager.agent(aid).spec.to_doc() for aid in self.manager.active_ids()]
        self.request("reset_roster", {"specs": specs})

    def shutdown(self) -> None:
        self.status = "draining"
        try:
            self.request("shutdown")
            self._conn.close()
        except (WireError, OSError):
            pass


def adopt_tcp_pod(pod_manager: Any, pid: str, conn: socket.socket, stores: Any) -> PodClient:
    """Build a PodClient over an accepted connection and register it."""
    controller, manager = pod_manager.make_parts(pid)
    client = PodClient(pid, controller, manager, conn, stores)
    pod_manager.adopt_pod(client)
    return client


class TcpPodCluster:
    """Listens for worker connections and adopts them as PodClients."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._listener = socket.create_server((host, port))
        self.address = self._listener.getsockname()

    def spawn_worker(self, pid: str) -> subprocess.Popen:
        host, port = self.address
        return subprocess.Popen(
            [
                sys.executable,
                "-m",
                "socsim.wire",
                "--connect",
                f"{host}:{port}",
                "--pod",
                pid,
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
        )

    def accept(self, configure: dict[str, Any], timeout: float = 30.0) -> tuple[str, socket.socket]:
        self._listener.settimeout(timeout)
        conn, _ = self._listener.accept()
        conn.settimeout(timeout)
        hello = recv_frame(conn)
        if hello.get("t") != "hello" or hello.get("proto") != PROTOCOL_VERSION:
            raise WireError(f"bad handshake: {hello}")
        send_frame(conn, {"t": "hello_ack", "proto": PROTOCOL_VERSION})
        send_frame(conn, {"t": "configure", **configure})
        ack = recv_frame(conn)
        if ack.get("t") != "configured":
            raise WireError(f"worker failed to configure: {ack}")
        return hello["pod"], conn

    def close(self) -> None:
        self._listener.close()


# ---------------------------------------------------------------------------
# Worker side
# ---------------------------------------------------------------------------


class RemoteRpc:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._call_id = 0

    def call(self, op: str, args: dict[str, Any]) -> Any:
        self._call_id += 1
        send_frame(self._sock, {"t": "call", "id": self._call_id, "op": op, "args": args})
        frame = recv_frame(self._sock)
        if frame.get("t") != "call_res" or frame.get("id") != self._call_id:
            raise WireError(f"unexpected frame during call: {frame}")
        if frame.get("error"):
            raise WireError(frame["error"])
        return frame.get("value")


class RemoteAdapter:
    """Worker-side adapter view over a coordinator-owned namespace."""

    def __init__(self, namespace: tuple[str, str, str], rpc: RemoteRpc):
        self.namespace = namespace
        self.kind = "kv"
        self._rpc = rpc

    def _kv(self, op: str, **kw: Any) -> Any:
        return self._rpc.call("kv", {"ns": list(self.namespace), "op": op, **kw})

    def kv_get(self, key: str, default: Any = None) -> Any:
        value = self._kv("get", key=key)
        return default if value is None else value

    def kv_put(self, key: str, value: Any) -> None:
        self._kv("put", key=key, value=value)

    def kv_delete(self, key: str) -> bool:
        return self._kv("delete", key=key)

    def kv_scan_prefix(self, prefix: str) -> list[str]:
        return self._kv("scan", prefix=prefix)

    def kv_contains(self, key: str) -> bool:
        return self._kv("contains", key=key)


class RemoteStoreRegistry:
    def __init__(self, rpc: RemoteRpc):
        self._rpc = rpc

    def open_adapter(self, plugin: str, pod: str, store: str, kind: str = "kv") -> RemoteAdapter:
        return RemoteAdapter((pod, plugin, store), self._rpc)


class _MirrorTimer:
    def __init__(self, ticks_per_day: int):
        self.current = 0
        self.ticks_per_day = ticks_per_day

    def tick_to_simtime(self, t: int) -> tuple[int, float]:
        day = t // self.ticks_per_day
        return day, 24.0 * (t % self.ticks_per_day) / self.ticks_per_day


class _MirrorRecorder:
    def __init__(self, rpc: RemoteRpc):
        self._rpc = rpc

    def record(self, e: EventRecord) -> None:
        self._rpc.call("record", {"line": e.to_line()})


class _MirrorSystem:
    def __init__(self, rpc: RemoteRpc, ticks_per_day: int):
        self.timer = _MirrorTimer(ticks_per_day)
        self.recorder = _MirrorRecorder(rpc)
        self.in_tick = True


class _MirrorActions:
    """Read-only mirror of the coordinator's routing table."""

    def __init__(self, rpc: RemoteRpc):
        self._rpc = rpc
        self.version = -1
        self._descriptors: list[Any] = []
        self.table = self

    def refresh_if_stale(self, version: int) -> None:
        if version == self.version:
            return
        from .actions import ActionDescriptor

        doc = self._rpc.call("action_table", {})
        self.version = doc["version"]
        self._descriptors = [ActionDescriptor(**d) for d in doc["descriptors"]]

    def names(self) -> list[str]:
        return sorted(d.name for d in self._descriptors)

    def descriptors(self, agent_callable_only: bool = False) -> list[Any]:
        out = self._descriptors
        if agent_callable_only:
            out = [d for d in out if d.callable_by_agents]
        return sorted(out, key=lambda d: d.name)


class RemoteController:
    """Worker-side stand-in exposing the Controller surface agent plugins use."""

    def __init__(self, rpc: RemoteRpc, ticks_per_day: int):
        self._rpc = rpc
        self.system = _MirrorSystem(rpc, ticks_per_day)
        self.actions = _MirrorActions(rpc)

    @property
    def executing_tick(self) -> int:
        return self.system.timer.current + 1

    def route_action(self, req: ActionRequest, caller_is_agent: bool = True) -> ActionResult:
        doc = self._rpc.call(
            "route_action",
            {"caller": req.caller, "name": req.action_name, "args": dict(req.args), "tick": req.tick},
        )
        return ActionResult(doc["status"], doc["detail"], rule_id=doc.get("rule_id"))

    def route_env(self, component: str, method: str, args: dict[str, Any], log: bool = True) -> Any:
        return self._rpc.call("route_env", {"component": component, "method": method, "args": args})

    def route_send(self, sender: str, recipients: list[str], payload: Any) -> Message:
        return Message.from_doc(self._rpc.call(
            "route_send", {"sender": sender, "recipients": recipients, "payload": payload}
        ))

    def drain_for(self, agent: str, tick: int) -> list[Message]:
        return [Message.from_doc(d) for d in self._rpc.call("drain", {"agent": agent, "tick": tick})]

    def recipient_known(self, agent: str) -> bool:
        return bool(self._rpc.call("recipient_known", {"agent": agent}))

    def remove_agent(self, agent: str, cause: str) -> None:
        self._rpc.call("remove_agent", {"agent": agent, "cause": cause})

    def spawn_agents(self, specs: list[AgentSpec]) -> list[str]:
        return self._rpc.call("spawn", {"specs": [s.to_doc() for s in specs]})


class PodWorker:
    def __init__(self, sock: socket.socket, pod: str):
        self._sock = sock
        self.pod = pod
        self._rpc = RemoteRpc(sock)
        self._manager: AgentManager | None = None
        self._controller: RemoteController | None = None

    def configure(self, doc: dict[str, Any]) -> None:
        from .scenarios import build_runtime, load_scenario

        package = load_scenario(doc["scenario"])
        package.constants["ticks_per_day"] = doc["ticks_per_day"]
        stores = RemoteStoreRegistry(self._rpc)
        runtime = build_runtime(package, stores, doc["engine"], include_world=False)
        self._controller = RemoteController(self._rpc, doc["ticks_per_day"])
        self._manager = AgentManager(self.pod, self._controller, runtime.plugin_registry, doc["seed"])

    def serve(self) -> None:
        while True:
            frame = recv_frame(self._sock)
            if frame["t"] != "req":
                raise WireError(f"unexpected frame {frame['t']!r}")
            try:
                value = self._apply(frame["op"], frame["args"])
                send_frame(self._sock, {"t": "res", "id": frame["id"], "value": value})
            except _Shutdown:
                send_frame(self._sock, {"t": "res", "id": frame["id"], "value": True})
                return
            except Exception as exc:
                send_frame(
                    self._sock,
                    {"t": "res", "id": frame["id"], "error": f"{type(exc).__name__}: {exc}"},
                )

    def _apply(self, op: str, args: dict[str, Any]) -> Any:
        manager = self._manager
        assert manager is not None and self._controller is not None
        if op == "admit":
            spec = AgentSpec.from_doc(args["spec"])
            manager._agents[spec.id] = Agent(spec)
            return True
        if op == "drop":
            manager._agents.pop(args["aid"], None)
            manager._streams.pop(args["aid"], None)
            return True
        if op == "reset_roster":
            manager._agents.clear()
            manager._streams.clear()
            for doc in args["specs"]:
                spec = AgentSpec.from_doc(doc)
                manager._agents[spec.id] = Agent(spec)
            return True
        if op == "set_routine":
            manager._agents[args["aid"]].routine = tuple(args["routine"])
            return True
        if op == "execute":
            self._controller.system.timer.current = args["tick"] - 1
            self._controller.actions.refresh_if_stale(args.get("table_version", 0))
            manager.execute_agent(args["aid"], args["tick"])
            return True
        if op == "stats":
            size = sum(
                len(canon_json(manager.agent(aid).spec.to_doc())) for aid in manager.active_ids()
            )
            return {
                "agent_count": manager.agent_count(),
                "memory_estimate": size + 2048,
                "tick_duration_ms": 0.0,
            }
        if op == "shutdown":
            raise _Shutdown
        raise WireError(f"unknown op {op!r}")


class _Shutdown(Exception):
    pass


def worker_main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="socsim-pod-worker")
    parser.add_argument("--connect", required=True, help="coordinator host:port")
    parser.add_argument("--pod", required=True, help="pod id")
    args = parser.parse_args(argv)
    host, _, port = args.connect.rpartition(":")
    sock = socket.create_connection((host, int(port)))
    send_frame(sock, {"t": "hello", "proto": PROTOCOL_VERSION, "pod": args.pod})
    ack = recv_frame(sock)
    if ack.get("t") != "hello_ack" or ack.get("proto") != PROTOCOL_VERSION:
        raise WireError(f"bad handshake ack: {ack}")
    configure = recv_frame(sock)
    if configure.get("t") != "configure":
        raise WireError(f"expected configure, got {configure}")
    worker = PodWorker(sock, args.pod)
    worker.configure(configure)
    send_frame(sock, {"t": "configured", "pod": args.pod})
    worker.serve()
    return 0


if __name__ == "__main__":
    sys.exit(worker_main())
