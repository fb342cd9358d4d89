"""Action facade: agent-callable routing table over hot-swappable plugins.

Plugins declare actions at registration with an ``agent_call`` mark (the
permission annotation), an argument schema, and a category. The facade builds
an immutable routing table mapping each unique action name to its owning
plugin; duplicate names across plugins fail registration naming both.

Scenario behaviors are data: catalog entries (JSON) executed by the generic
:class:`CommunicationPlugin` (interactions between agents) and
:class:`CatalogActionsPlugin` (individual behaviors), optionally deferring to
a scenario handler hook. This is what lets two scenarios share these plugins
binary-identically.
"""
from __future__ import annotations

import inspect
import json
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Callable, TYPE_CHECKING

from .kernel import ActionRequest, ActionResult, normalize_pod_prefixes
from .rng import RngStream

if TYPE_CHECKING:  # pragma: no cover
    from .controller import Controller


class RegistrationError(Exception):
    pass


@dataclass(frozen=True)
class ActionDescriptor:
    name: str
    owner_plugin: str
    callable_by_agents: bool
    arg_schema: dict[str, str] = field(default_factory=dict)
    category: str = "uncategorized"


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    kind: str  # local-function | remote-service
    doc: str
    arg_schema: dict[str, str] = field(default_factory=dict)

    def to_doc(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "doc": self.doc, "arg_schema": self.arg_schema}


@dataclass
class ActionContext:
    """Execution context handed to action handlers by the Controller."""

    caller: str
    tick: int
    rng: RngStream
    controller: "Controller"
    entry: dict[str, Any] | None = None  # catalog entry for generic handlers


Handler = Callable[..., ActionResult]


def agent_call(
    category: str = "uncategorized", schema: dict[str, str] | None = None
) -> Callable[[Handler], Handler]:
    """Mark a plugin method as callable by agents (the permission annotation)."""

    def mark(fn: Handler) -> Handler:
        fn.__action_mark__ = {"agent": True, "category": category, "schema": schema or {}}
        return fn

    return mark


def system_call(schema: dict[str, str] | None = None) -> Callable[[Handler], Handler]:
    """Mark a plugin method as a system-only management interface."""

    def mark(fn: Handler) -> Handler:
        fn.__action_mark__ = {"agent": False, "category": "system", "schema": schema or {}}
        return fn

    return mark


class ActionPlugin:
    """Base action plugin; actions are introspected from marked methods."""

    plugin_id = "action-plugin"

    def actions(self) -> list[tuple[ActionDescriptor, Handler]]:
        found = []
        for attr in dir(self):
            fn = getattr(self, attr)
            mark = getattr(fn, "__action_mark__", None)
            if mark:
                found.append(
                    (
                        ActionDescriptor(
                            name=attr,
                            owner_plugin=self.plugin_id,
                            callable_by_agents=mark["agent"],
                            arg_schema=mark["schema"],
                            category=mark["category"],
                        ),
                        fn,
                    )
                )
        return found


_TYPE_CHECKS: dict[str, Callable[[Any], bool]] = {
    "str": lambda v: isinstance(v, str),
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "bool": lambda v: isinstance(v, bool),
    "cell": lambda v: isinstance(v, (list, tuple)) and len(v) == 2,
    "list": lambda v: isinstance(v, (list, tuple)),
    "dict": lambda v: isinstance(v, dict),
    "agent": lambda v: isinstance(v, str),
    "any": lambda v: True,
}


def validate_args(schema: dict[str, str], args: dict[str, Any]) -> str | None:
    """Return an error string on schema violation, else None."""
    for name, value in args.items():
        if name not in schema:
            return f"unexpected argument {name!r}"
        check = _TYPE_CHECKS.get(schema[name], _TYPE_CHECKS["any"])
        if not check(value):
            return f"argument {name!r} is not a {schema[name]}"
    return None


class RoutingTable:
    def __init__(self) -> None:
        self._entries: dict[str, tuple[ActionDescriptor, Handler]] = {}

    @classmethod
    def build(cls, plugins: list[ActionPlugin]) -> "RoutingTable":
        table = cls()
        for plugin in plugins:
            for descriptor, handler in plugin.actions():
                if descriptor.name in table._entries:
                    other = table._entries[descriptor.name][0]
                    raise RegistrationError(
                        f"duplicate action {descriptor.name!r} from plugins "
                        f"{other.owner_plugin!r} and {descriptor.owner_plugin!r}"
                    )
                table._entries[descriptor.name] = (descriptor, handler)
        return table

    def lookup(self, name: str) -> tuple[ActionDescriptor, Handler] | None:
        return self._entries.get(name)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def descriptors(self, agent_callable_only: bool = False) -> list[ActionDescriptor]:
        out = [d for d, _ in self._entries.values()]
        if agent_callable_only:
            out = [d for d in out if d.callable_by_agents]
        return sorted(out, key=lambda d: d.name)


class ActionFacade:
    """Central registry; rebuilds the routing table on every registration.

    ``version`` bumps on every registration so remote pod workers know when
    to refresh their mirrored table.
    """

    def __init__(self) -> None:
        self._plugins: list[ActionPlugin] = []
        self.table = RoutingTable.build([])
        self.version = 0

    def register_plugin(self, plugin: ActionPlugin) -> None:
        RoutingTable.build(self._plugins + [plugin])  # validate before committing
        self._plugins.append(plugin)
        self.table = RoutingTable.build(self._plugins)
        self.version += 1

    def invoke(self, req: ActionRequest, caller_is_agent: bool, ctx: ActionContext) -> ActionResult:
        entry = self.table.lookup(req.action_name)
        if entry is None:
            return ActionResult("failed", f"unknown action {req.action_name!r}")
        descriptor, handler = entry
        if caller_is_agent and not descriptor.callable_by_agents:
            return ActionResult(
                "denied", f"{req.action_name} is not agent-callable", rule_id="permission"
            )
        problem = validate_args(descriptor.arg_schema, dict(req.args))
        if problem:
            return ActionResult("failed", f"bad-args: {problem}")
        try:
            inspect.signature(handler).bind(ctx, **req.args)
        except TypeError as exc:
            return ActionResult("failed", f"bad-args: {exc}")
        return handler(ctx, **req.args)


# ---------------------------------------------------------------------------
# Generic behavior execution shared by both catalog plugins
# ---------------------------------------------------------------------------


def chebyshev(a: list[int] | tuple[int, int], b: list[int] | tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def _step_toward(ctx: ActionContext, target_cell: list[int], steps: int) -> list[int] | None:
    """Move the caller up to ``steps`` validated grid steps toward a cell."""
    cell = ctx.controller.route_env("space", "position_of", {"agent": ctx.caller})
    if cell is None:
        return None
    for _ in range(steps):
        if list(cell) == list(target_cell):
            break
        dx = (target_cell[0] > cell[0]) - (target_cell[0] < cell[0])
        dy = (target_cell[1] > cell[1]) - (target_cell[1] < cell[1])
        nxt = [cell[0] + dx, cell[1] + dy]
        res = ctx.controller.route_env("space", "move", {"agent": ctx.caller, "to": nxt})
        if res.get("status") != "ok":
            break
        cell = res["cell"]
    return list(cell)


def _nearest_static(ctx: ActionContext, kind: str) -> dict[str, Any] | None:
    cell = ctx.controller.route_env("space", "position_of", {"agent": ctx.caller})
    if cell is None:
        return None
    best = None
    for obj in ctx.controller.route_env("space", "statics", {}):
        if obj.get("attributes", {}).get("kind") != kind:
            continue
        d = chebyshev(cell, obj["cell"])
        if best is None or (d, obj["name"]) < (best[0], best[1]):
            best = (d, obj["name"], obj)
    return best[2] if best else None


def resolve_handler(path: str) -> Callable[..., ActionResult]:
    """Resolve a ``module:function`` catalog handler hook."""
    module_name, _, attr = path.partition(":")
    module = __import__(module_name, fromlist=[attr])
    return getattr(module, attr)


class CommunicationPlugin(ActionPlugin):
    """All inter-agent information transfer: chat plus catalog interactions.

    Messages are encapsulated, dispatched via the Controller/Messager, stored
    in this plugin's own namespace, and queryable afterwards.
    """

    plugin_id = "communication"

    def __init__(self, adapter, catalog: list[dict[str, Any]] | None = None):
        self._kv = adapter
        self._catalog = [e for e in (catalog or []) if e.get("owner") == "communication"]

    def actions(self) -> list[tuple[ActionDescriptor, Handler]]:
        found = super().actions()
        for entry in self._catalog:
            descriptor = ActionDescriptor(
                name=entry["name"],
                owner_plugin=self.plugin_id,
                callable_by_agents=True,
                arg_schema={"target": "agent"},
                category=entry.get("category", "social"),
            )
            handler = self._make_interaction(entry)
            found.append((descriptor, handler))
        return found

    def _make_interaction(self, entry: dict[str, Any]) -> Handler:
        def run(ctx: ActionContext, target: str = "") -> ActionResult:
            ctx = ActionContext(ctx.caller, ctx.tick, ctx.rng, ctx.controller, entry)
            if entry.get("handler"):
                return resolve_handler(entry["handler"])(ctx, target, self)
            return self.perform_interaction(ctx, target)

        return run

    def perform_interaction(self, ctx: ActionContext, target: str) -> ActionResult:
        entry = ctx.entry or {}
        params = entry.get("params", {})
        if not target:
            return ActionResult("failed", "no-target")
        target_cell = ctx.controller.route_env("space", "position_of", {"agent": target})
        if target_cell is None:
            return ActionResult("failed", "target-gone")
        rng_range = int(params.get("range", 1))
        cell = _step_toward(ctx, target_cell, int(params.get("approach_step", 1)))
        if cell is None:
            return ActionResult("failed", "not-placed")
        if chebyshev(cell, target_cell) > rng_range:
            return ActionResult("ok", "approach", state_deltas=())
        payload = {"interaction": entry["name"], "from": ctx.caller}
        self._hand_to_messager(ctx, [target], payload)
        deltas = []
        for fname, amount in params.get("target_effects", {}).items():
            deltas.append(("state", f"{target}/{fname}", {"op": "add", "value": amount}))
        if params.get("relation_type"):
            self._bond(ctx, target, params["relation_type"], float(params.get("weight_delta", 0.05)))
        return ActionResult("ok", "done", state_deltas=tuple(deltas))

    def _bond(self, ctx: ActionContext, target: str, rtype: str, delta: float) -> None:
        current = 0.0
        for edge in ctx.controller.route_env("relation", "neighbors", {"a": ctx.caller, "type": rtype}):
            if edge["id"] == target:
                current = edge["weight"]
                break
        weight = min(1.0, max(0.0, current + delta))
        ctx.controller.route_env(
            "relation", "update", {"a": ctx.caller, "b": target, "type": rtype, "weight": weight}
        )
        ctx.controller.route_env(
            "relation", "update", {"a": target, "b": ctx.caller, "type": rtype, "weight": weight}
        )

    def _hand_to_messager(self, ctx: ActionContext, recipients: list[str], payload: Any) -> Any:
        message = ctx.controller.route_send(ctx.caller, list(recipients), payload)
        self._store_conversation(ctx, recipients, payload, message.id)
        return message

    def _store_conversation(
        self, ctx: ActionContext, recipients: list[str], payload: Any, message_id: str
    ) -> None:
        pair = ":".join(sorted([ctx.caller, recipients[0]])) if len(recipients) == 1 else ctx.caller
        seq = len(self._kv.kv_scan_prefix(f"conv/{pair}/"))
        self._kv.kv_put(
            f"conv/{pair}/{ctx.tick:08d}-{seq:06d}",
            {
                "from": ctx.caller,
                "to": list(recipients),
                "payload": payload,
                "tick": ctx.tick,
                # pod prefix stripped: stored state must not depend on layout
                "message_id": normalize_pod_prefixes(message_id),
            },
        )

    def stored_conversation_count(self) -> int:
        return len(self._kv.kv_scan_prefix("conv/"))

    @agent_call(category="social", schema={"to": "list", "text": "str"})
    def send_message(self, ctx: ActionContext, to: list[str], text: str) -> ActionResult:
        """Private or group chat to explicit recipient ids."""
        if not text:
            return ActionResult("failed", "empty-content")
        recipients = [r for r in to if isinstance(r, str) and r]
        if not recipients:
            return ActionResult("failed", "no-recipients")
        live = [r for r in recipients if ctx.controller.recipient_known(r)]
        if not live:
            self._hand_to_messager(ctx, recipients, {"text": text, "from": ctx.caller})
            return ActionResult("failed", "dead-letter")
        self._hand_to_messager(ctx, recipients, {"text": text, "from": ctx.caller})
        return ActionResult("ok", f"sent to {len(recipients)}")

    @agent_call(category="social", schema={"with_id": "agent", "limit": "int"})
    def query_conversation(self, ctx: ActionContext, with_id: str, limit: int = 50) -> ActionResult:
        pair = ":".join(sorted([ctx.caller, with_id]))
        keys = self._kv.kv_scan_prefix(f"conv/{pair}/")[-limit:]
        records = [self._kv.kv_get(k) for k in keys]
        return ActionResult("ok", json.dumps(records, sort_keys=True))


class CatalogActionsPlugin(ActionPlugin):
    """Individual (single-agent) behaviors defined by catalog entries."""

    plugin_id = "other-actions"

    def __init__(self, adapter, catalog: list[dict[str, Any]] | None = None):
        self._kv = adapter
        self._catalog = [e for e in (catalog or []) if e.get("owner") == "other"]

    def actions(self) -> list[tuple[ActionDescriptor, Handler]]:
        found = super().actions()
        for entry in self._catalog:
            descriptor = ActionDescriptor(
                name=entry["name"],
                owner_plugin=self.plugin_id,
                callable_by_agents=True,
                arg_schema={"to": "cell"},
                category=entry.get("category", "uncategorized"),
            )
            found.append((descriptor, self._make_individual(entry)))
        return found

    def _make_individual(self, entry: dict[str, Any]) -> Handler:
        def run(ctx: ActionContext, to: list[int] | None = None) -> ActionResult:
            ctx = ActionContext(ctx.caller, ctx.tick, ctx.rng, ctx.controller, entry)
            if entry.get("handler"):
                return resolve_handler(entry["handler"])(ctx, to, self)
            return self.perform_individual(ctx, to)

        return run

    def perform_individual(self, ctx: ActionContext, to: list[int] | None = None) -> ActionResult:
        entry = ctx.entry or {}
        params = entry.get("params", {})
        target_kind = params.get("target_kind")
        if target_kind:
            obj = _nearest_static(ctx, target_kind)
            if obj is None:
                return ActionResult("failed", f"no {target_kind} on map")
            cell = _step_toward(ctx, obj["cell"], int(params.get("approach_step", 1)))
            if cell is None:
                return ActionResult("failed", "not-placed")
            if chebyshev(cell, obj["cell"]) > int(params.get("range", 1)):
                return ActionResult("ok", "approach")
            return ActionResult("ok", "done")
        movement = params.get("move", "none")
        if movement == "random_adjacent":
            cell = ctx.controller.route_env("space", "position_of", {"agent": ctx.caller})
            if cell is None:
                return ActionResult("failed", "not-placed")
            dx, dy = ctx.rng.choice([(0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (-1, -1), (1, -1), (-1, 1)])
            nxt = [cell[0] + dx, cell[1] + dy]
            res = ctx.controller.route_env("space", "move", {"agent": ctx.caller, "to": nxt})
            detail = "done" if res.get("status") == "ok" else res.get("detail", "blocked")
            return ActionResult("ok", detail)
        if movement == "to_cell" and to is not None:
            res = ctx.controller.route_env("space", "move", {"agent": ctx.caller, "to": list(to)})
            if res.get("status") != "ok":
                return ActionResult("failed", res.get("detail", "blocked"))
            return ActionResult("ok", "done", state_deltas=(("space", f"pos/{ctx.caller}", res["cell"]),))
        return ActionResult("ok", "done")

    @agent_call(category="idle")
    def idle(self, ctx: ActionContext) -> ActionResult:
        return ActionResult("ok", "idle")

    @system_call()
    def reset_world(self, ctx: ActionContext) -> ActionResult:
        """System-only management hook; exists to exercise permission control."""
        return ActionResult("ok", "reset")


class ToolsPlugin(ActionPlugin):
    """Local function tools and remote service tools behind one discovery surface.

    Local tools are stateless functions; remote tools live behind a proxy
    speaking the minimal discover/call HTTP subset.
    """

    plugin_id = "tools"

    def __init__(self) -> None:
        self._local: dict[str, tuple[ToolDescriptor, Callable[..., Any]]] = {}
        self._remote: RemoteToolProxy | None = None

    def register_local(
        self, fn: Callable[..., Any], name: str | None = None, schema: dict[str, str] | None = None
    ) -> None:
        tool_name = name or fn.__name__
        descriptor = ToolDescriptor(
            name=tool_name, kind="local-function", doc=(fn.__doc__ or "").strip(), arg_schema=schema or {}
        )
        self._local[tool_name] = (descriptor, fn)

    def attach_remote(self, proxy: "RemoteToolProxy") -> None:
        self._remote = proxy

    def tool_descriptors(self) -> list[ToolDescriptor]:
        tools = [d for d, _ in self._local.values()]
        if self._remote is not None:
            tools.extend(self._remote.discover())
        return sorted(tools, key=lambda t: t.name)

    @agent_call(category="tools")
    def tool_discover(self, ctx: ActionContext) -> ActionResult:
        tools = [t.to_doc() for t in self.tool_descriptors()]
        return ActionResult("ok", json.dumps(tools, sort_keys=True))

    @agent_call(category="tools", schema={"name": "str", "args": "dict"})
    def tool_call(self, ctx: ActionContext, name: str, args: dict[str, Any] | None = None) -> ActionResult:
        args = args or {}
        if name in self._local:
            try:
                value = self._local[name][1](**args)
            except Exception as exc:  # tool bugs must not crash the tick
                return ActionResult("failed", f"tool-error: {exc}")
            return ActionResult("ok", json.dumps(value, sort_keys=True))
        if self._remote is not None:
            return self._remote.call(name, args)
        return ActionResult("failed", f"unknown tool {name!r}")


class RemoteToolProxy:
    """Minimal remote-tool client: GET /tools to discover, POST /call to run."""

    def __init__(self, endpoint: str, timeout: float = 5.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def discover(self) -> list[ToolDescriptor]:
        try:
            with urllib.request.urlopen(f"{self.endpoint}/tools", timeout=self.timeout) as resp:
                listed = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError):
            return []
        return [
            ToolDescriptor(
                name=t["name"],
                kind="remote-service",
                doc=t.get("doc", ""),
                arg_schema=t.get("arg_schema", {}),
            )
            for t in listed
        ]

    def call(self, name: str, args: dict[str, Any]) -> ActionResult:
        body = json.dumps({"name": name, "args": args}).encode("utf-8")
        request = urllib.request.Request(
            f"{self.endpoint}/call", data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                value = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError):
            return ActionResult("failed", "tool-unavailable")
        return ActionResult("ok", json.dumps(value, sort_keys=True))
