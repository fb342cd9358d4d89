"""The Mediator: exclusive channel for all inter-module and inter-agent traffic.

Every action invocation, environment call, and message send goes through a
Controller, which validates requests against an ordered list of declarative
rules (first match wins, implicit trailing allow), dispatches to the owning
module, applies resulting agent-state deltas, and emits exactly one
EventRecord per top-level routed request (environment/messager calls nested
inside an action's execution belong to that action's record; message sends
always log their own record for message tracking).

No module other than the Controller may call ``ActionFacade.invoke``,
``Messager.send``, or ``Environment.env_run``: enforced by an architectural
test over the source tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .actions import ActionContext, ActionFacade
from .environment import DispatchFault, Environment
from .kernel import SYSTEM, ActionRequest, ActionResult, EventRecord, Message
from .rng import RngStream
from .services import System


class RuleValidationError(Exception):
    pass


@dataclass(frozen=True)
class ValidationRule:
    """Declarative predicate over (action, caller role, caller region, tick window)."""

    id: str
    effect: str  # allow | deny
    actions: tuple[str, ...] | None = None
    role: str | None = None
    region: str | None = None
    ticks: tuple[int, int] | None = None  # inclusive window
    message: str = ""

    def matches(self, action: str, role: str | None, region: str | None, tick: int) -> bool:
        if self.actions is not None and action not in self.actions:
            return False
        if self.role is not None and role != self.role:
            return False
        if self.region is not None and region != self.region:
            return False
        if self.ticks is not None and not (self.ticks[0] <= tick <= self.ticks[1]):
            return False
        return True

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ValidationRule":
        actions = doc.get("actions")
        if isinstance(doc.get("action"), str):
            actions = [doc["action"]]
        ticks = doc.get("ticks")
        return cls(
            id=doc["id"],
            effect=doc.get("effect", "deny"),
            actions=tuple(actions) if actions else None,
            role=doc.get("role"),
            region=doc.get("region"),
            ticks=(int(ticks[0]), int(ticks[1])) if ticks else None,
            message=doc.get("message", ""),
        )


IMPLICIT_ALLOW = ValidationRule(id="__implicit_allow__", effect="allow")


def validate_rules(
    rules: list[ValidationRule],
    known_actions: set[str],
    known_roles: set[str],
    known_regions: set[str],
) -> None:
    """Rules may reference only declared actions, roles, and regions."""
    for rule in rules:
        if rule.effect not in ("allow", "deny"):
            raise RuleValidationError(f"rule {rule.id}: bad effect {rule.effect!r}")
        for name in rule.actions or ():
            if name not in known_actions:
                raise RuleValidationError(f"rule {rule.id}: unknown action {name!r}")
        if rule.role is not None and known_roles and rule.role not in known_roles:
            raise RuleValidationError(f"rule {rule.id}: unknown role {rule.role!r}")
        if rule.region is not None and rule.region not in known_regions:
            raise RuleValidationError(f"rule {rule.id}: unknown region {rule.region!r}")


class RuleSet:
    """Ordered rules shared by every Controller; evaluated first-match-wins."""

    def __init__(self) -> None:
        self.rules: list[ValidationRule] = []

    def first_match(self, action: str, role: str | None, region: str | None, tick: int) -> ValidationRule:
        for rule in self.rules:
            if rule.matches(action, role, region, tick):
                return rule
        return IMPLICIT_ALLOW

    def replace(self, rules: list[ValidationRule]) -> None:
        self.rules = list(rules)


@dataclass(frozen=True)
class GlobalEvent:
    """System-originated broadcast delivered as SYSTEM-sender messages."""

    name: str
    payload: dict[str, Any] = field(default_factory=dict)
    target_filter: dict[str, Any] = field(default_factory=dict)


@dataclass
class RuntimeHooks:
    """Callbacks wired at boot so the Controller stays decoupled from the runtime."""

    profile_of: Callable[[str], dict[str, Any] | None]
    state_of: Callable[[str], dict[str, Any] | None]
    apply_state_delta: Callable[[str, str, Any], None]
    active_agents: Callable[[], list[str]]
    remove_agent: Callable[[str, str], None]
    spawn_agents: Callable[[list[Any]], list[str]]
    rng_of: Callable[[str], RngStream]
    restore_snapshot: Callable[[str], int]
    declared_roles: Callable[[], set[str]]
    declared_regions: Callable[[], set[str]]


class Controller:
    def __init__(
        self,
        pod: str,
        system: System,
        environment: Environment,
        actions: ActionFacade,
        rules: RuleSet,
        hooks: RuntimeHooks,
    ):
        self.pod = pod
        self.system = system
        self.environment = environment
        self.actions = actions
        self.rules = rules
        self.hooks = hooks
        self._depth = 0

    # -- time ------------------------------------------------------------------

    @property
    def executing_tick(self) -> int:
        # Inside a tick, events/messages stamp the tick being executed; at a
        # barrier they stamp the completed tick so next-tick delivery means
        # "the very next executed tick" for barrier injections too.
        if getattr(self.system, "in_tick", False):
            return self.system.timer.current + 1
        return self.system.timer.current

    # -- routing -----------------------------------------------------------------

    def route_action(self, req: ActionRequest, caller_is_agent: bool = True) -> ActionResult:
        top_level = self._depth == 0
        role, region = self._caller_context(req.caller)
        rule = self.rules.first_match(req.action_name, role, region, req.tick)
        if rule.effect == "deny":
            self.system.recorder.record(
                EventRecord.make(
                    req.tick, "intercept", req.caller, action=req.action_name, rule=rule.id
                )
            )
            return ActionResult("denied", rule.message or rule.id, rule_id=rule.id)
        rng = self.hooks.rng_of(req.caller)
        rng.begin_tick(req.tick)
        ctx = ActionContext(caller=req.caller, tick=req.tick, rng=rng, controller=self)
        self._depth += 1
        try:
            result = self.actions.invoke(req, caller_is_agent, ctx)
        except Exception as exc:  # plugin fault surfaces as a failed result
            result = ActionResult("failed", f"plugin-fault: {type(exc).__name__}: {exc}")
        finally:
            self._depth -= 1
        for plugin, key, value in result.state_deltas:
            if plugin == "state":
                agent, _, fname = key.partition("/")
                self.hooks.apply_state_delta(agent, fname, value)
        if top_level:
            self.system.recorder.record(
                EventRecord.make(
                    req.tick,
                    "action",
                    req.caller,
                    action=req.action_name,
                    status=result.status,
                    detail=result.detail[:120],
                )
            )
        return result

    def route_env(
        self, component: str, method: str, args: dict[str, Any], log: bool = True
    ) -> Any:
        top_level = self._depth == 0
        self._depth += 1
        try:
            result = self.environment.env_run(component, method, args)
        finally:
            self._depth -= 1
        if top_level and log:
            self.system.recorder.record(
                EventRecord.make(
                    self.executing_tick,
                    "action",
                    SYSTEM,
                    action=f"env:{component}.{method}",
                    status="ok",
                )
            )
        return result

    def route_send(self, sender: str, recipients: list[str], payload: Any) -> Message:
        tick = self.executing_tick
        seq = self.system.messager.next_seq(sender, tick)
        message = Message(
            id=f"{self.pod}/{tick:08d}-{sender}-{seq:04d}",
            sender=sender,
            recipients=tuple(recipients),
            payload=payload,
            send_tick=tick,
            seq=seq,
        )
        self.system.messager.send(message)
        self.system.recorder.record(
            EventRecord.make(
                tick, "message", sender, id=message.id, to=",".join(recipients), seq=seq
            )
        )
        return message

    def deliver_message(self, message: Message) -> bool:
        """Broker intake: hand an already-constructed message to the Messager."""
        return self.system.messager.send(message)

    def drain_for(self, agent: str, tick: int) -> list[Message]:
        return self.system.messager.drain(agent, tick)

    def recipient_known(self, agent: str) -> bool:
        return self.system.messager.has_mailbox(agent)

    # -- rules --------------------------------------------------------------------

    def set_rules(self, rules: list[ValidationRule]) -> None:
        validate_rules(
            rules,
            set(self.actions.table.names()),
            self.hooks.declared_roles(),
            self.hooks.declared_regions(),
        )
        self.rules.replace(rules)
        self.system.recorder.record(
            EventRecord.make(
                self.executing_tick, "config-change", SYSTEM, what="rules", count=len(rules)
            )
        )

    def _caller_context(self, caller: str) -> tuple[str | None, str | None]:
        if caller == SYSTEM:
            return None, None
        profile = self.hooks.profile_of(caller) or {}
        role = profile.get("role")
        region = None
        if self.environment.has_component("space"):
            space = self.environment.component("space")
            region = space.region_of(space.position_of(caller))  # type: ignore[attr-defined]
        return role, region

    # -- global events ---------------------------------------------------------

    def broadcast(self, event: GlobalEvent) -> int:
        delivered = 0
        for agent in self.hooks.active_agents():
            profile = self.hooks.profile_of(agent) or {}
            state = self.hooks.state_of(agent) or {}
            if all(profile.get(k, state.get(k)) == v for k, v in event.target_filter.items()):
                self.route_send(SYSTEM, [agent], {"event": event.name, **event.payload})
                delivered += 1
        return delivered

    # -- rollback ---------------------------------------------------------------

    def rollback(self, to_snapshot: str) -> int:
        from_tick = self.system.timer.current
        restored = self.hooks.restore_snapshot(to_snapshot)
        self.system.recorder.record(
            EventRecord.make(restored, "rollback", SYSTEM, from_tick=from_tick, to_tick=restored)
        )
        self.system.recorder.flush_barrier()
        return restored

    # -- agent lifecycle (delegated) ---------------------------------------------

    def remove_agent(self, agent: str, cause: str) -> None:
        self.hooks.remove_agent(agent, cause)

    def spawn_agents(self, specs: list[Any]) -> list[str]:
        return self.hooks.spawn_agents(specs)


class ControllerPort:
    """Narrow, caller-tagged surface handed to agent plugins."""

    def __init__(self, controller: Controller, agent: str):
        self._controller = controller
        self.agent = agent

    @property
    def tick(self) -> int:
        return self._controller.executing_tick

    @property
    def ticks_per_day(self) -> int:
        return self._controller.system.timer.ticks_per_day

    def simtime(self) -> tuple[int, float]:
        return self._controller.system.timer.tick_to_simtime(self.tick)

    def is_active(self, agent: str) -> bool:
        return self._controller.recipient_known(agent)

    def invoke_action(self, name: str, args: dict[str, Any] | None = None) -> ActionResult:
        req = ActionRequest(caller=self.agent, action_name=name, args=args or {}, tick=self.tick)
        return self._controller.route_action(req, caller_is_agent=True)

    def env(self, component: str, method: str, **args: Any) -> Any:
        # Agent-internal environment access is covered by the agent's own
        # routine/action records; only operator-level env routes log.
        return self._controller.route_env(component, method, args, log=False)

    def try_env(self, component: str, method: str, **args: Any) -> Any:
        try:
            return self.env(component, method, **args)
        except DispatchFault:
            return None

    def drain_mailbox(self) -> list[Message]:
        return self._controller.drain_for(self.agent, self.tick)

    def record(self, kind: str, **attrs: Any) -> None:
        self._controller.system.recorder.record(
            EventRecord.make(self.tick, kind, self.agent, **attrs)
        )

    def action_descriptors(self) -> list[Any]:
        return self._controller.actions.table.descriptors(agent_callable_only=True)

    def action_names(self) -> list[str]:
        return self._controller.actions.table.names()

    def remove_self(self, cause: str) -> None:
        self._controller.remove_agent(self.agent, cause)

    def spawn(self, specs: list[Any]) -> list[str]:
        return self._controller.spawn_agents(specs)
